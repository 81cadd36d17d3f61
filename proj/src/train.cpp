#include "sattn/train.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>

#include "sattn/errors.hpp"
#include "sattn/ops.hpp"
#include "sattn/optim.hpp"

namespace sattn {

PreparedData prepare_data(const SeriesDataset& raw, const ModelConfig& config) {
  config.validate();
  if (raw.variates() != config.C) {
    throw ShapeError("dataset '" + raw.name + "' has " + std::to_string(raw.variates()) + " variates, config C=" +
                     std::to_string(config.C));
  }
  auto [tr, va] = default_split_ratios(raw.name);
  if (config.train_ratio > 0.0) {
    tr = config.train_ratio;
    va = config.val_ratio;
  }
  PreparedData out;
  out.raw = split(raw, tr, va, config.L + config.T);
  out.scaled = out.raw;
  out.scaled.values = standardize(out.raw.values, out.raw.norm_stats);
  return out;
}

namespace {

std::vector<std::size_t> resolve_horizons(std::vector<std::size_t> h, std::size_t T) {
  if (h.empty()) h.push_back(T);
  return h;
}

std::vector<Tensor> snapshot(const Model& model) {
  std::vector<Tensor> out;
  for (const Parameter* p : model.parameters().all()) out.push_back(p->value);
  return out;
}

void restore(Model& model, const std::vector<Tensor>& values) {
  auto params = model.parameters().all();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

double split_loss(const Model& model, const PreparedData& data, Split split, std::size_t stride) {
  const auto& cfg = model.config();
  const std::size_t n = window_count(data.scaled, split, cfg.L, cfg.T, stride);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const WindowPair w = window_at(data.scaled, split, i, cfg.L, cfg.T, stride);
    total += mse(model.forecast(w.input), w.target);
  }
  return total / static_cast<double>(n);
}

MetricsReport evaluate(const Model& model, const PreparedData& data, Split split,
                       const std::vector<std::size_t>& horizons, std::size_t stride) {
  const auto& cfg = model.config();
  MetricAccumulator acc(resolve_horizons(horizons, cfg.T));
  const std::size_t n = window_count(data.scaled, split, cfg.L, cfg.T, stride);
  for (std::size_t i = 0; i < n; ++i) {
    const WindowPair w = window_at(data.scaled, split, i, cfg.L, cfg.T, stride);
    const Tensor pred = destandardize(model.forecast(w.input), data.raw.norm_stats);
    acc.add(pred, destandardize(w.target, data.raw.norm_stats));
  }
  MetricsReport r = acc.report();
  r.config_hash = cfg.hash();
  r.seed = cfg.seed;
  return r;
}

MetricsReport naive_last_value(const PreparedData& data, Split split, std::size_t L, std::size_t T,
                               const std::vector<std::size_t>& horizons, std::size_t stride) {
  MetricAccumulator acc(resolve_horizons(horizons, T));
  const std::size_t n = window_count(data.raw, split, L, T, stride);
  for (std::size_t i = 0; i < n; ++i) {
    const WindowPair w = window_at(data.raw, split, i, L, T, stride);
    Tensor pred(w.target.shape());
    for (std::size_t c = 0; c < pred.rows(); ++c) {
      for (std::size_t t = 0; t < T; ++t) pred(c, t) = w.input(c, L - 1);
    }
    acc.add(pred, w.target);
  }
  return acc.report();
}

TrainReport train(Model& model, const PreparedData& data, const TrainOptions& options) {
  const ModelConfig& cfg = model.config();
  const auto horizons = resolve_horizons(options.horizons, cfg.T);
  const std::size_t n_train = window_count(data.scaled, Split::train, cfg.L, cfg.T);
  if (n_train == 0) throw DataError("train: empty training split");

  TrainReport report;
  report.config_hash = cfg.hash();
  report.seed = cfg.seed;
  report.train_windows = n_train;
  report.initial_test = evaluate(model, data, Split::test, horizons, options.eval_stride);
  report.naive_test = naive_last_value(data, Split::test, cfg.L, cfg.T, horizons, options.eval_stride);
  report.naive_test.config_hash = report.config_hash;
  report.naive_test.seed = cfg.seed;

  const bool frozen = cfg.lr == 0.0;
  std::optional<Adam> adam;
  if (!frozen) adam.emplace(AdamOptions{cfg.lr});
  const SeedSequence seeds(cfg.seed);
  auto params = model.parameters().all();
  std::vector<Tensor> best = snapshot(model);
  std::vector<std::size_t> order(n_train);
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = seeds.stream("train/shuffle", epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    auto dropout_rng = seeds.stream("train/dropout", epoch);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t stop = std::min(n_train, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);
      model.parameters().zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const WindowPair w = window_at(data.scaled, Split::train, order[b], cfg.L, cfg.T);
        Tape tape;
        ForwardOptions fo;
        fo.dropout_rng = &dropout_rng;
        Var loss = mse_loss(model.forward(tape, w.input, fo), tape.constant(w.target));
        epoch_loss += loss.value()[0];
        if (!frozen) tape.backward(scale(loss, inv));
      }
      if (!frozen) adam->step(params, ++step);
    }

    EpochRecord rec{epoch, epoch_loss / static_cast<double>(n_train),
                    split_loss(model, data, Split::val, options.eval_stride)};
    report.epochs.push_back(rec);
    if (report.best_epoch == 0 || rec.val_loss < report.best_val_loss) {
      report.best_epoch = epoch;
      report.best_val_loss = rec.val_loss;
      best = snapshot(model);
    }
    if (options.log != nullptr) {
      *options.log << "epoch " << epoch << " train " << rec.train_loss << " val " << rec.val_loss << '\n';
    }
  }
  restore(model, best);
  report.test = evaluate(model, data, Split::test, horizons, options.eval_stride);
  return report;
}

nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json j;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["train_windows"] = r.train_windows;
  auto& ep = j["epochs"] = nlohmann::json::array();
  for (const auto& e : r.epochs) ep.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  j["best_epoch"] = r.best_epoch;
  j["best_val_loss"] = r.best_val_loss;
  j["initial_test"] = to_json(r.initial_test);
  j["test"] = to_json(r.test);
  j["naive_test"] = to_json(r.naive_test);
  return j;
}

}  // namespace sattn
