#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "sattn/analysis.hpp"
#include "sattn/data.hpp"
#include "sattn/model.hpp"

namespace sattn {

/// A split dataset plus its standardized copy (training-split statistics).
struct PreparedData {
  SeriesDataset raw;
  SeriesDataset scaled;
};

/// Splits with the config's ratios (or the dataset default), requiring every
/// segment to hold one L+T window, then standardizes. Throws DataError or
/// ShapeError when the data does not fit the config.
PreparedData prepare_data(const SeriesDataset& raw, const ModelConfig& config);

struct TrainOptions {
  std::vector<std::size_t> horizons;  // per-horizon metric prefixes; empty = {T}
  std::size_t eval_stride = 1;        // window stride for val/test evaluation
  std::ostream* log = nullptr;        // one line per epoch when set
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t train_windows = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 if no epoch ran
  double best_val_loss = 0.0;
  MetricsReport initial_test;  // before any update
  MetricsReport test;          // with the best-validation parameters
  MetricsReport naive_test;    // last-value-repeat baseline
};

/// Mean MSE on the standardized scale over a split.
double split_loss(const Model& model, const PreparedData& data, Split split, std::size_t stride = 1);

/// Metrics in the data's original units.
MetricsReport evaluate(const Model& model, const PreparedData& data, Split split,
                       const std::vector<std::size_t>& horizons, std::size_t stride = 1);

/// Repeats each variate's last observed value for T steps.
MetricsReport naive_last_value(const PreparedData& data, Split split, std::size_t L, std::size_t T,
                               const std::vector<std::size_t>& horizons, std::size_t stride = 1);

/// Minibatch Adam on the MSE of standardized windows. Each epoch shuffles the
/// training windows from a seeded stream. After the last epoch the
/// parameters from the epoch with the lowest validation loss are restored.
/// With lr = 0 no update is applied. Throws DataError for an empty training
/// split.
TrainReport train(Model& model, const PreparedData& data, const TrainOptions& options = {});

nlohmann::json to_json(const TrainReport& r);

}  // namespace sattn
