#include "sattn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

#include "sattn/errors.hpp"
#include "sattn/linalg.hpp"
#include "sattn/model.hpp"
#include "sattn/ops.hpp"

namespace sattn {

double mse(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

double mae(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

MetricAccumulator::MetricAccumulator(std::vector<std::size_t> horizons)
    : horizons_(std::move(horizons)), sq_(horizons_.size()), abs_(horizons_.size()), counts_(horizons_.size()) {}

void MetricAccumulator::add(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "metrics");
  require_matrix(pred, "metrics");
  for (std::size_t k = 0; k < horizons_.size(); ++k) {
    if (horizons_[k] == 0 || horizons_[k] > pred.cols()) {
      throw ShapeError("metrics: horizon " + std::to_string(horizons_[k]) + " exceeds forecast length " +
                       std::to_string(pred.cols()));
    }
  }
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    for (std::size_t t = 0; t < pred.cols(); ++t) {
      const double e = pred(i, t) - target(i, t);
      total_sq_ += e * e;
      total_abs_ += std::abs(e);
      for (std::size_t k = 0; k < horizons_.size(); ++k) {
        if (t < horizons_[k]) {
          sq_[k] += e * e;
          abs_[k] += std::abs(e);
          ++counts_[k];
        }
      }
    }
  }
  total_count_ += pred.size();
  ++windows_;
}

MetricsReport MetricAccumulator::report() const {
  if (total_count_ == 0) throw DataError("metrics: no windows accumulated");
  MetricsReport r;
  r.mse = total_sq_ / static_cast<double>(total_count_);
  r.mae = total_abs_ / static_cast<double>(total_count_);
  r.windows = windows_;
  for (std::size_t k = 0; k < horizons_.size(); ++k) {
    const auto n = static_cast<double>(counts_[k]);
    r.per_horizon.push_back({horizons_[k], sq_[k] / n, abs_[k] / n});
  }
  return r;
}

Tensor average_attention(std::span<const Tensor> maps) {
  if (maps.empty()) throw DataError("average_attention: no maps");
  std::size_t n = 0;
  Tensor acc({1, 1});
  std::size_t count = 0;
  for (const Tensor& m : maps) {
    std::size_t heads = 1, rows = 0, cols = 0;
    if (m.rank() == 3) {
      heads = m.dim(0);
      rows = m.dim(1);
      cols = m.dim(2);
    } else if (m.rank() == 2) {
      rows = m.dim(0);
      cols = m.dim(1);
    } else {
      throw ShapeError("average_attention: expected {H, N, N} or N x N, got " + shape_to_string(m.shape()));
    }
    if (rows != cols) throw ShapeError("average_attention: maps must be square");
    if (n == 0) {
      n = rows;
      acc = Tensor({n, n});
    } else if (rows != n) {
      throw ShapeError("average_attention: maps disagree on N (" + std::to_string(n) + " vs " + std::to_string(rows) +
                       ")");
    }
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < n * n; ++i) acc[i] += m[h * n * n + i];
    }
    count += heads;
  }
  for (auto& v : acc.storage()) v /= static_cast<double>(count);
  return acc;
}

double condition_number(const Tensor& a) {
  const auto s = svd_singular_values(a);
  const double smin = s.back();
  if (smin < 1e-300) return std::numeric_limits<double>::infinity();
  return s.front() / smin;
}

std::size_t numerical_rank(const Tensor& a, double tol) {
  if (!(tol > 0.0)) throw ConfigError("numerical_rank: tolerance must be positive");
  const auto s = svd_singular_values(a);
  const double cutoff = tol * s.front();
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double v) { return v > cutoff; }));
}

AttentionReport attention_report(std::span<const Tensor> maps, Mechanism mechanism, double rank_tol) {
  AttentionReport r;
  r.averaged_map = average_attention(maps);
  r.rank = numerical_rank(r.averaged_map, rank_tol);
  r.condition_number = condition_number(r.averaged_map);
  r.mechanism = mechanism;
  r.maps = maps.size();
  return r;
}

bool GradCheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.pass; });
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ModelConfig& config, double tolerance, double step) {
  ModelConfig cfg = config;
  cfg.dropout = 0.0;
  Model model(cfg);
  const SeedSequence seeds(cfg.seed);
  auto rng = seeds.stream("gradcheck/data");
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor x({cfg.C, cfg.L}), target({cfg.C, cfg.T});
  for (auto& v : x.storage()) v = normal(rng);
  for (auto& v : target.storage()) v = normal(rng);

  auto loss_value = [&]() {
    Tape tape;
    return mse_loss(model.forward(tape, x), tape.constant(target)).value()[0];
  };

  model.parameters().zero_grad();
  {
    Tape tape;
    Var loss = mse_loss(model.forward(tape, x), tape.constant(target));
    tape.backward(loss);
  }

  GradCheckReport report;
  report.label = std::string(to_string(cfg.architecture)) + "/" + std::string(to_string(cfg.mechanism));
  report.tolerance = tolerance;
  for (Parameter* p : model.parameters().all()) {
    GradCheckEntry e;
    e.parameter = p->name;
    e.entries = p->value.size();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      const double up = loss_value();
      p->value[i] = saved - step;
      const double down = loss_value();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad[i];
      e.max_abs_error = std::max(e.max_abs_error, std::abs(analytic - numeric));
      e.max_rel_error = std::max(e.max_rel_error, relative_error(analytic, numeric));
    }
    e.pass = e.max_rel_error < tolerance;
    report.entries.push_back(std::move(e));
  }
  return report;
}

std::vector<ModelConfig> micro_configs() {
  ModelConfig base;
  base.L = 16;
  base.T = 4;
  base.D = 8;
  base.H = 2;
  base.layers = 1;
  base.kernel_K = 3;
  base.dropout = 0.0;
  base.seed = 11;

  std::vector<ModelConfig> out;
  for (Mechanism m : {Mechanism::conventional, Mechanism::fsatten, Mechanism::soatten}) {
    ModelConfig c = base;
    c.architecture = Architecture::variate;
    c.mechanism = m;
    c.C = 3;
    c.F = m == Mechanism::soatten ? 6 : 0;
    out.push_back(c);
  }
  for (Mechanism m : {Mechanism::conventional, Mechanism::soatten}) {
    ModelConfig c = base;
    c.architecture = Architecture::temporal;
    c.mechanism = m;
    c.C = 2;
    c.P = 4;
    c.S = 2;
    c.F = m == Mechanism::soatten ? 4 : 0;
    out.push_back(c);
  }
  return out;
}

void write_matrix_csv(std::ostream& out, const Tensor& m) {
  require_matrix(m, "write_matrix_csv");
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.8g", m(i, j));
      out << (j == 0 ? "" : ",") << buf;
    }
    out << '\n';
  }
}

void write_pgm(std::ostream& out, const Tensor& m) {
  require_matrix(m, "write_pgm");
  const auto [lo_it, hi_it] = std::minmax_element(m.storage().begin(), m.storage().end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  out << "P2\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const long level = range > 0.0 ? std::lround((m(i, j) - lo) / range * 255.0) : 0;
      out << (j == 0 ? "" : " ") << level;
    }
    out << '\n';
  }
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["mse"] = r.mse;
  j["mae"] = r.mae;
  j["windows"] = r.windows;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  auto& ph = j["per_horizon"] = nlohmann::json::array();
  for (const auto& h : r.per_horizon) ph.push_back({{"T", h.horizon}, {"mse", h.mse}, {"mae", h.mae}});
  return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.mse = j.at("mse").get<double>();
  r.mae = j.at("mae").get<double>();
  r.windows = j.value("windows", std::size_t{0});
  r.config_hash = j.value("config_hash", std::string{});
  r.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("per_horizon")) {
    for (const auto& h : j.at("per_horizon")) {
      r.per_horizon.push_back({h.at("T").get<std::size_t>(), h.at("mse").get<double>(), h.at("mae").get<double>()});
    }
  }
  return r;
}

nlohmann::json to_json(const AttentionReport& r) {
  nlohmann::json j;
  j["mechanism"] = std::string(to_string(r.mechanism));
  j["N"] = r.averaged_map.rows();
  j["maps_averaged"] = r.maps;
  j["rank"] = r.rank;
  // JSON has no infinity; a singular map is reported as null.
  if (std::isfinite(r.condition_number)) j["condition_number"] = r.condition_number;
  else j["condition_number"] = nullptr;
  return j;
}

nlohmann::json to_json(const GradCheckReport& r) {
  nlohmann::json j;
  j["label"] = r.label;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass();
  j["max_rel_error"] = r.max_rel_error();
  auto& params = j["parameters"] = nlohmann::json::array();
  for (const auto& e : r.entries) {
    params.push_back({{"name", e.parameter},
                      {"entries", e.entries},
                      {"max_rel_error", e.max_rel_error},
                      {"max_abs_error", e.max_abs_error},
                      {"pass", e.pass}});
  }
  return j;
}

}  // namespace sattn
