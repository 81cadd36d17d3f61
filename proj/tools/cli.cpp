#include "cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "sattn/analysis.hpp"
#include "sattn/checkpoint.hpp"
#include "sattn/data.hpp"
#include "sattn/errors.hpp"
#include "sattn/train.hpp"

namespace sattn {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "' (expected train|val|test)");
}

ModelConfig load_config(const std::string& path) {
  ModelConfig c = ModelConfig::load(path);
  c.apply_env_overrides();
  c.validate();
  return c;
}

struct TrainArgs {
  std::string config, data, out;
  std::vector<std::size_t> horizons;
  bool verbose = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const ModelConfig cfg = load_config(a.config);
  const PreparedData data = prepare_data(load_csv(a.data), cfg);
  Model model(cfg);
  TrainOptions opts;
  opts.horizons = a.horizons;
  if (a.verbose) opts.log = &out;
  const TrainReport report = train(model, data, opts);
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  save_checkpoint((dir / "checkpoint.txt").string(), model);
  write_text(dir / "train_report.json", dump(to_json(report)));
  write_text(dir / "metrics.json", dump(to_json(report.test)));
  out << "trained " << to_string(cfg.architecture) << "/" << to_string(cfg.mechanism) << " for " << report.epochs.size()
      << " epochs; best epoch " << report.best_epoch << "; test mse " << report.test.mse << " mae "
      << report.test.mae << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, out, split = "test";
  std::vector<std::size_t> horizons;
};

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
  const Model model = load_checkpoint(a.checkpoint);
  const PreparedData data = prepare_data(load_csv(a.data), model.config());
  const std::string text = dump(to_json(evaluate(model, data, parse_split(a.split), a.horizons)));
  if (a.out.empty()) {
    out << text;
  } else {
    if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_text(a.out, text);
  }
  return 0;
}

struct AnalyzeArgs {
  std::string checkpoint, data, out, split = "test";
  std::size_t stride = 1;
  double rank_tol = 1e-10;
  bool no_pgm = false;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const Model model = load_checkpoint(a.checkpoint);
  const ModelConfig& cfg = model.config();
  const PreparedData data = prepare_data(load_csv(a.data), cfg);
  const Split split = parse_split(a.split);
  const std::size_t n = window_count(data.scaled, split, cfg.L, cfg.T, a.stride);
  std::vector<Tensor> maps;
  std::vector<AttentionTensor> capture;
  for (std::size_t i = 0; i < n; ++i) {
    capture.clear();
    model.forecast(window_at(data.scaled, split, i, cfg.L, cfg.T, a.stride).input, capture);
    for (const auto& at : capture) maps.push_back(at.effective());
  }
  const AttentionReport report = attention_report(maps, cfg.mechanism, a.rank_tol);
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  std::ostringstream csv;
  write_matrix_csv(csv, report.averaged_map);
  write_text(dir / "attention_map.csv", csv.str());
  if (!a.no_pgm) {
    std::ostringstream pgm;
    write_pgm(pgm, report.averaged_map);
    write_text(dir / "attention_map.pgm", pgm.str());
  }
  nlohmann::json j = to_json(report);
  j["config_hash"] = cfg.hash();
  j["windows"] = n;
  j["rank_tolerance"] = a.rank_tol;
  write_text(dir / "attention_report.json", dump(j));
  out << "N=" << report.averaged_map.rows() << " rank=" << report.rank << " condition_number=" << report.condition_number
      << "\n";
  return 0;
}

struct GradArgs {
  std::string mechanism, architecture, out;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
  std::optional<Mechanism> mech;
  std::optional<Architecture> arch;
  if (!a.mechanism.empty()) mech = parse_mechanism(a.mechanism);
  if (!a.architecture.empty()) arch = parse_architecture(a.architecture);
  nlohmann::json all = nlohmann::json::array();
  bool pass = true;
  std::size_t ran = 0;
  for (const ModelConfig& c : micro_configs()) {
    if ((mech && c.mechanism != *mech) || (arch && c.architecture != *arch)) continue;
    const GradCheckReport r = grad_check(c, a.tolerance);
    pass = pass && r.pass();
    ++ran;
    out << (r.pass() ? "PASS " : "FAIL ") << r.label << " max_rel_error=" << r.max_rel_error() << "\n";
    all.push_back(to_json(r));
  }
  if (ran == 0) throw ConfigError("gradcheck: no micro config matches the filter");
  if (!a.out.empty()) write_text(a.out, dump(all));
  return pass ? 0 : 1;
}

struct SynthArgs {
  std::string spec, out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SeriesDataset ds = synth_multisine(SynthSpec::load(a.spec));
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  save_csv(a.out, ds);
  out << "wrote " << ds.variates() << " variates x " << ds.length() << " steps to " << a.out << "\n";
  return 0;
}

struct SweepArgs {
  std::string param, config, data, out;
  std::vector<std::size_t> values;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  if (a.param != "F" && a.param != "K") throw ConfigError("sweep: --param must be F or K");
  const ModelConfig base = load_config(a.config);
  if (a.param == "K" && !(base.mechanism == Mechanism::soatten && base.hcc_enabled)) {
    throw ConfigError("sweep: K only affects soatten with hcc_enabled=true");
  }
  const SeriesDataset raw = load_csv(a.data);
  std::ostringstream table;
  table << "param,value,parameters,best_epoch,val_loss,test_mse,test_mae\n";
  for (std::size_t v : a.values) {
    ModelConfig cfg = base;
    if (a.param == "F") cfg.F = v;
    else cfg.kernel_K = v;
    const PreparedData data = prepare_data(raw, cfg);
    Model model(cfg);
    const TrainReport r = train(model, data);
    char line[256];
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%zu,%.8g,%.8g,%.8g\n", a.param.c_str(), v, model.parameter_count(),
                  r.best_epoch, r.best_val_loss, r.test.mse, r.test.mae);
    table << line;
    out << line;
  }
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_text(a.out, table.str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral and orthogonal attention forecasters", "sattn"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint, reports and metrics");
  train_cmd->add_option("--config", ta.config, "key=value config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--data", ta.data, "CSV dataset")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", ta.out, "output directory")->required();
  train_cmd->add_option("--horizons", ta.horizons, "per-horizon metric prefixes")->delimiter(',');
  train_cmd->add_flag("--verbose", ta.verbose, "print per-epoch losses");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Compute metrics of a checkpoint");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ea.data)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ea.out, "metrics JSON path (default: stdout)");
  eval_cmd->add_option("--split", ea.split, "train|val|test");
  eval_cmd->add_option("--horizons", ea.horizons)->delimiter(',');

  AnalyzeArgs aa;
  auto* analyze_cmd = app.add_subcommand("analyze-attention", "Average attention maps and report rank and conditioning");
  analyze_cmd->add_option("--checkpoint", aa.checkpoint)->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--data", aa.data)->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--out", aa.out, "output directory")->required();
  analyze_cmd->add_option("--split", aa.split, "train|val|test");
  analyze_cmd->add_option("--stride", aa.stride, "window stride")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--rank-tol", aa.rank_tol, "relative rank tolerance")->check(CLI::PositiveNumber);
  analyze_cmd->add_flag("--no-pgm", aa.no_pgm, "skip the PGM heatmap");

  GradArgs ga;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check on micro configs");
  grad_cmd->add_option("--mechanism", ga.mechanism, "conventional|fsatten|soatten");
  grad_cmd->add_option("--architecture", ga.architecture, "temporal|variate");
  grad_cmd->add_option("--tolerance", ga.tolerance)->check(CLI::PositiveNumber);
  grad_cmd->add_option("--out", ga.out, "JSON report path");

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a multi-sine dataset");
  synth_cmd->add_option("--spec", sa.spec)->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", sa.out)->required();

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train once per value of F or K and tabulate results");
  sweep_cmd->add_option("--param", wa.param, "F or K")->required();
  sweep_cmd->add_option("--values", wa.values)->required()->delimiter(',');
  sweep_cmd->add_option("--config", wa.config)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--data", wa.data)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", wa.out, "results CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(ta, out);
    if (eval_cmd->parsed()) return cmd_evaluate(ea, out);
    if (analyze_cmd->parsed()) return cmd_analyze(aa, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(ga, out);
    if (synth_cmd->parsed()) return cmd_synth(sa, out);
    if (sweep_cmd->parsed()) return cmd_sweep(wa, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace sattn
