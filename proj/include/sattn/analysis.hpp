#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sattn/attention.hpp"
#include "sattn/config.hpp"
#include "sattn/tensor.hpp"

namespace sattn {

/// Mean squared / absolute error over all entries. Throws ShapeError on mismatch.
double mse(const Tensor& pred, const Tensor& target);
double mae(const Tensor& pred, const Tensor& target);

struct HorizonMetrics {
  std::size_t horizon = 0;  // first `horizon` forecast steps
  double mse = 0.0;
  double mae = 0.0;
};

struct MetricsReport {
  double mse = 0.0;
  double mae = 0.0;
  std::vector<HorizonMetrics> per_horizon;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t windows = 0;
};

/// Running sums over (pred, target) pairs. Accumulation order is call order.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::vector<std::size_t> horizons = {});
  void add(const Tensor& pred, const Tensor& target);
  MetricsReport report() const;

 private:
  std::vector<std::size_t> horizons_;
  std::vector<double> sq_, abs_;
  std::vector<std::size_t> counts_;
  double total_sq_ = 0.0, total_abs_ = 0.0;
  std::size_t total_count_ = 0, windows_ = 0;
};

/// Arithmetic mean over every head of every map ({H, N, N} or N x N).
/// Throws DataError for an empty list, ShapeError if N differs.
Tensor average_attention(std::span<const Tensor> maps);

/// sigma_max / sigma_min; +infinity when sigma_min < 1e-300.
double condition_number(const Tensor& a);
/// Singular values greater than tol * sigma_max. Throws ConfigError for tol <= 0.
std::size_t numerical_rank(const Tensor& a, double tol = 1e-10);

struct AttentionReport {
  Tensor averaged_map = Tensor({1, 1});
  std::size_t rank = 0;
  double condition_number = 0.0;
  Mechanism mechanism = Mechanism::conventional;
  std::size_t maps = 0;
};

AttentionReport attention_report(std::span<const Tensor> maps, Mechanism mechanism, double rank_tol = 1e-10);

struct GradCheckEntry {
  std::string parameter;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::string label;
  std::vector<GradCheckEntry> entries;
  double tolerance = 1e-4;
  bool pass() const;
  double max_rel_error() const;
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckFloor = 1e-6;

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = kGradCheckFloor);

/// Central-difference check of every parameter of a model built from
/// `config` against an MSE loss on seeded random inputs and targets.
/// Dropout is disabled.
GradCheckReport grad_check(const ModelConfig& config, double tolerance = 1e-4, double step = kGradCheckStep);

/// Micro-scale configs for each valid (architecture, mechanism) pair.
std::vector<ModelConfig> micro_configs();

/// Matrix as CSV with 8 significant digits.
void write_matrix_csv(std::ostream& out, const Tensor& m);
/// Plain PGM (P2), min-max scaled to 0..255.
void write_pgm(std::ostream& out, const Tensor& m);

nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const AttentionReport& r);
nlohmann::json to_json(const GradCheckReport& r);
MetricsReport metrics_from_json(const nlohmann::json& j);

}  // namespace sattn
