#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sattn/tensor.hpp"

namespace sattn {

enum class Split { train, val, test };

std::string_view to_string(Split s);

/// Per-variate statistics of the training split.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // population std; 1 where the series is constant

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// A C x Tlen multivariate series. Immutable once loaded and split.
struct SeriesDataset {
  std::string name;
  Tensor values = Tensor({1, 1});
  std::string index_header = "date";
  std::vector<std::string> timestamps;  // empty or one per time step
  std::vector<std::string> variate_names;
  std::size_t train_end = 0;  // 0 until split() is applied
  std::size_t val_end = 0;
  NormStats norm_stats;

  std::size_t variates() const { return values.rows(); }
  std::size_t length() const { return values.cols(); }
  bool is_split() const { return train_end > 0; }
  /// [begin, end) of a split. Throws DataError if the dataset is not split.
  std::pair<std::size_t, std::size_t> range(Split s) const;
};

/// Parses an ETT-style CSV: header row, leading date/index column, numeric
/// variate columns. Throws FormatError for empty input or ragged rows and
/// ParseError (with row and column) for missing or non-numeric cells.
SeriesDataset parse_csv(std::istream& in, std::string name);
SeriesDataset load_csv(const std::string& path);
/// Writes the same schema with 17 significant digits.
void write_csv(std::ostream& out, const SeriesDataset& ds);
void save_csv(const std::string& path, const SeriesDataset& ds);

/// (train, val) ratios: 0.6/0.2 for names starting with "ETT", else 0.7/0.1.
std::pair<double, double> default_split_ratios(std::string_view name);

/// Sets contiguous chronological bounds train_end = floor(n*r_train),
/// val_end = train_end + floor(n*r_val), and recomputes norm_stats from the
/// training split. With min_segment > 0 every segment must hold that many
/// points. Throws DataError when a bound is degenerate.
SeriesDataset split(SeriesDataset ds, double train_ratio, double val_ratio, std::size_t min_segment = 0);

/// Mean and population std of values[:, 0:end).
NormStats compute_norm_stats(const Tensor& values, std::size_t end);

/// (x - mean) / std per variate with the dataset's stored stats.
Tensor standardize(const Tensor& values, const NormStats& stats);
Tensor destandardize(const Tensor& values, const NormStats& stats);

struct WindowPair {
  Tensor input;   // C x L
  Tensor target;  // C x T, starting right after input
  std::size_t origin_index = 0;  // absolute index of input's first column
};

/// Number of windows fully inside a split. Throws DataError if none fit.
std::size_t window_count(const SeriesDataset& ds, Split s, std::size_t L, std::size_t T, std::size_t stride = 1);
/// The i-th window of a split without materializing the others.
WindowPair window_at(const SeriesDataset& ds, Split s, std::size_t i, std::size_t L, std::size_t T,
                     std::size_t stride = 1);
std::vector<WindowPair> windows(const SeriesDataset& ds, Split s, std::size_t L, std::size_t T,
                                std::size_t stride = 1);

struct Tone {
  double bin = 1.0;  // cycles per window_length samples
  double amplitude = 1.0;
  double phase = 0.0;
};

/// Description of a synthetic multi-sine dataset.
///
/// Text form (key=value): name, variates, length, window, noise, seed, and
/// one `tone.<c>=bin,amp,phase[;bin,amp,phase...]` line per variate.
struct SynthSpec {
  std::string name = "synth";
  std::size_t variates = 4;
  std::size_t length = 1200;
  std::size_t window = 96;
  double noise = 0.05;
  std::uint64_t seed = 7;
  std::vector<std::vector<Tone>> tones;

  static SynthSpec parse(std::string_view text);
  static SynthSpec load(const std::string& path);
};

/// x_c[t] = sum over tones of a*sin(2*pi*bin*t/window + phase) + sigma*N(0,1).
/// Throws ConfigError for a tone at or above Nyquist (bin >= window/2).
SeriesDataset synth_multisine(std::size_t variates, std::size_t length, const std::vector<std::vector<Tone>>& tones,
                              double noise_sigma, std::uint64_t seed, std::size_t window_length);
SeriesDataset synth_multisine(const SynthSpec& spec);

/// Two pairs of variates: {0,1} at bin_a and {2,3} at bin_b, phases differ
/// within each pair.
SynthSpec paired_tone_spec(std::size_t length, std::size_t window, double bin_a, double bin_b, double noise,
                           std::uint64_t seed);

}  // namespace sattn
