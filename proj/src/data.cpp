#include "sattn/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "sattn/config.hpp"
#include "sattn/errors.hpp"
#include "sattn/rng.hpp"

namespace sattn {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

std::pair<std::size_t, std::size_t> SeriesDataset::range(Split s) const {
  if (!is_split()) throw DataError("dataset '" + name + "' has not been split");
  switch (s) {
    case Split::train: return {0, train_end};
    case Split::val: return {train_end, val_end};
    case Split::test: return {val_end, length()};
  }
  return {0, 0};
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view cell, std::size_t row, std::size_t col) {
  if (cell.empty()) {
    throw ParseError("missing value at row " + std::to_string(row) + ", column " + std::to_string(col));
  }
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || p != cell.data() + cell.size()) {
    throw ParseError("non-numeric value '" + std::string(cell) + "' at row " + std::to_string(row) + ", column " +
                     std::to_string(col));
  }
  return v;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SeriesDataset parse_csv(std::istream& in, std::string name) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header_line = line;
      break;
    }
  }
  if (header_line.empty()) throw FormatError("csv '" + name + "': empty file");
  header = split_fields(header_line);
  if (header.size() < 2) throw FormatError("csv '" + name + "': need an index column and at least one variate");

  const std::size_t c = header.size() - 1;
  std::vector<std::string> stamps;
  std::vector<double> rows;  // row-major Tlen x C
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw FormatError("csv '" + name + "': row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                        " fields, header has " + std::to_string(header.size()));
    }
    stamps.emplace_back(fields[0]);
    for (std::size_t j = 1; j < fields.size(); ++j) rows.push_back(parse_number(fields[j], line_no, j + 1));
  }
  if (stamps.empty()) throw FormatError("csv '" + name + "': no data rows");

  SeriesDataset ds;
  ds.name = std::move(name);
  ds.index_header = std::string(header[0]);
  for (std::size_t j = 1; j < header.size(); ++j) ds.variate_names.emplace_back(header[j]);
  const std::size_t n = stamps.size();
  ds.values = Tensor({c, n});
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < c; ++i) ds.values(i, t) = rows[t * c + i];
  }
  ds.timestamps = std::move(stamps);
  return ds;
}

SeriesDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (const auto dot = name.find_last_of('.'); dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return parse_csv(in, name);
}

void write_csv(std::ostream& out, const SeriesDataset& ds) {
  out << ds.index_header;
  for (std::size_t i = 0; i < ds.variates(); ++i) {
    out << ',' << (i < ds.variate_names.size() ? ds.variate_names[i] : "v" + std::to_string(i));
  }
  out << '\n';
  for (std::size_t t = 0; t < ds.length(); ++t) {
    out << (t < ds.timestamps.size() ? ds.timestamps[t] : std::to_string(t));
    for (std::size_t i = 0; i < ds.variates(); ++i) out << ',' << format_number(ds.values(i, t));
    out << '\n';
  }
}

void save_csv(const std::string& path, const SeriesDataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_csv(out, ds);
}

std::pair<double, double> default_split_ratios(std::string_view name) {
  if (name.substr(0, 3) == "ETT") return {0.6, 0.2};
  return {0.7, 0.1};
}

NormStats compute_norm_stats(const Tensor& values, std::size_t end) {
  require_matrix(values, "compute_norm_stats");
  if (end == 0 || end > values.cols()) throw DataError("compute_norm_stats: bad training extent");
  NormStats s{std::vector<double>(values.rows()), std::vector<double>(values.rows())};
  for (std::size_t i = 0; i < values.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t t = 0; t < end; ++t) mean += values(i, t);
    mean /= static_cast<double>(end);
    double var = 0.0;
    for (std::size_t t = 0; t < end; ++t) var += (values(i, t) - mean) * (values(i, t) - mean);
    const double sd = std::sqrt(var / static_cast<double>(end));
    s.mean[i] = mean;
    s.std[i] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

SeriesDataset split(SeriesDataset ds, double train_ratio, double val_ratio, std::size_t min_segment) {
  if (!(train_ratio > 0.0) || !(val_ratio >= 0.0) || train_ratio + val_ratio > 1.0 + 1e-12) {
    throw DataError("split: ratios must be positive and sum to at most 1");
  }
  const std::size_t n = ds.length();
  const auto train_end = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_ratio + 1e-9));
  const auto val_len = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_ratio + 1e-9));
  const std::size_t val_end = std::min(n, train_end + val_len);
  if (train_end == 0 || train_end >= val_end || val_end > n) {
    throw DataError("split: bounds (" + std::to_string(train_end) + ", " + std::to_string(val_end) +
                    ") violate 0 < train_end < val_end <= " + std::to_string(n));
  }
  if (min_segment > 0) {
    const std::size_t lens[3] = {train_end, val_end - train_end, n - val_end};
    const char* names[3] = {"train", "val", "test"};
    for (int k = 0; k < 3; ++k) {
      if (lens[k] < min_segment) {
        throw DataError(std::string("split: ") + names[k] + " segment has " + std::to_string(lens[k]) +
                        " points, a window needs " + std::to_string(min_segment));
      }
    }
  }
  ds.train_end = train_end;
  ds.val_end = val_end;
  ds.norm_stats = compute_norm_stats(ds.values, train_end);
  return ds;
}

Tensor standardize(const Tensor& values, const NormStats& stats) {
  require_matrix(values, "standardize");
  if (values.rows() != stats.mean.size()) throw ShapeError("standardize: variate count differs from stats");
  Tensor out = values;
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t t = 0; t < values.cols(); ++t) out(i, t) = (values(i, t) - stats.mean[i]) / stats.std[i];
  }
  return out;
}

Tensor destandardize(const Tensor& values, const NormStats& stats) {
  require_matrix(values, "destandardize");
  if (values.rows() != stats.mean.size()) throw ShapeError("destandardize: variate count differs from stats");
  Tensor out = values;
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t t = 0; t < values.cols(); ++t) out(i, t) = values(i, t) * stats.std[i] + stats.mean[i];
  }
  return out;
}

std::size_t window_count(const SeriesDataset& ds, Split s, std::size_t L, std::size_t T, std::size_t stride) {
  if (L == 0 || T == 0 || stride == 0) throw DataError("windows: L, T and stride must be positive");
  const auto [begin, end] = ds.range(s);
  const std::size_t len = end - begin;
  if (len < L + T) {
    throw DataError(std::string(to_string(s)) + " split has " + std::to_string(len) + " points, need L+T=" +
                    std::to_string(L + T));
  }
  return (len - (L + T)) / stride + 1;
}

WindowPair window_at(const SeriesDataset& ds, Split s, std::size_t i, std::size_t L, std::size_t T,
                     std::size_t stride) {
  const std::size_t count = window_count(ds, s, L, T, stride);
  if (i >= count) throw DataError("window index out of range");
  const std::size_t origin = ds.range(s).first + i * stride;
  const std::size_t c = ds.variates();
  WindowPair w{Tensor({c, L}), Tensor({c, T}), origin};
  for (std::size_t v = 0; v < c; ++v) {
    for (std::size_t t = 0; t < L; ++t) w.input(v, t) = ds.values(v, origin + t);
    for (std::size_t t = 0; t < T; ++t) w.target(v, t) = ds.values(v, origin + L + t);
  }
  return w;
}

std::vector<WindowPair> windows(const SeriesDataset& ds, Split s, std::size_t L, std::size_t T, std::size_t stride) {
  const std::size_t count = window_count(ds, s, L, T, stride);
  std::vector<WindowPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(window_at(ds, s, i, L, T, stride));
  return out;
}

SeriesDataset synth_multisine(std::size_t variates, std::size_t length, const std::vector<std::vector<Tone>>& tones,
                              double noise_sigma, std::uint64_t seed, std::size_t window_length) {
  if (variates == 0 || length == 0) throw ConfigError("synth: variates and length must be positive");
  if (window_length < 2) throw ConfigError("synth: window length must be at least 2");
  if (tones.size() != variates) {
    throw ConfigError("synth: " + std::to_string(tones.size()) + " tone sets for " + std::to_string(variates) +
                      " variates");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise sigma must be nonnegative");
  const double nyquist = static_cast<double>(window_length) / 2.0;
  for (std::size_t c = 0; c < variates; ++c) {
    for (const Tone& tone : tones[c]) {
      if (!(tone.bin >= 0.0) || tone.bin >= nyquist) {
        throw ConfigError("synth: tone bin " + format_number(tone.bin) + " of variate " + std::to_string(c) +
                          " is not below Nyquist (" + format_number(nyquist) + ") for window " +
                          std::to_string(window_length));
      }
    }
  }
  SeriesDataset ds;
  ds.index_header = "index";
  ds.values = Tensor({variates, length});
  const SeedSequence seeds(seed);
  const double w = 2.0 * std::numbers::pi / static_cast<double>(window_length);
  for (std::size_t c = 0; c < variates; ++c) {
    auto rng = seeds.stream("synth/noise", c);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t t = 0; t < length; ++t) {
      double x = 0.0;
      for (const Tone& tone : tones[c]) x += tone.amplitude * std::sin(w * tone.bin * static_cast<double>(t) + tone.phase);
      ds.values(c, t) = x + noise_sigma * noise(rng);
    }
    ds.variate_names.push_back("v" + std::to_string(c));
  }
  for (std::size_t t = 0; t < length; ++t) ds.timestamps.push_back(std::to_string(t));
  return ds;
}

SeriesDataset synth_multisine(const SynthSpec& spec) {
  SeriesDataset ds = synth_multisine(spec.variates, spec.length, spec.tones, spec.noise, spec.seed, spec.window);
  ds.name = spec.name;
  return ds;
}

namespace {

double spec_number(const std::string& key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("synth spec: '" + key + "' has non-numeric value '" + std::string(v) + "'");
  }
  return out;
}

std::size_t spec_count(const std::string& key, std::string_view v) {
  const double d = spec_number(key, v);
  if (d < 0.0 || d != std::floor(d)) throw ConfigError("synth spec: '" + key + "' must be a nonnegative integer");
  return static_cast<std::size_t>(d);
}

}  // namespace

SynthSpec SynthSpec::parse(std::string_view text) {
  SynthSpec spec;
  std::map<std::size_t, std::vector<Tone>> tone_map;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "name") spec.name = value;
    else if (key == "variates") spec.variates = spec_count(key, value);
    else if (key == "length") spec.length = spec_count(key, value);
    else if (key == "window") spec.window = spec_count(key, value);
    else if (key == "noise") spec.noise = spec_number(key, value);
    else if (key == "seed") {
      std::uint64_t s = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), s);
      if (ec != std::errc() || p != value.data() + value.size()) throw ConfigError("synth spec: bad seed '" + value + "'");
      spec.seed = s;
    } else if (key.rfind("tone.", 0) == 0) {
      const std::size_t c = spec_count(key, std::string_view(key).substr(5));
      std::vector<Tone> list;
      std::string_view rest = value;
      while (!trim(rest).empty()) {
        const auto semi = rest.find(';');
        const std::string_view item = rest.substr(0, semi);
        rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
        const auto parts = split_fields(item);
        if (parts.size() != 3) throw ConfigError("synth spec: '" + key + "' entries must be bin,amplitude,phase");
        list.push_back(Tone{spec_number(key, parts[0]), spec_number(key, parts[1]), spec_number(key, parts[2])});
      }
      tone_map[c] = std::move(list);
    } else {
      throw ConfigError("synth spec: unknown key '" + key + "'");
    }
  }
  spec.tones.assign(spec.variates, {});
  for (auto& [c, list] : tone_map) {
    if (c >= spec.variates) throw ConfigError("synth spec: tone for variate " + std::to_string(c) + " out of range");
    spec.tones[c] = std::move(list);
  }
  return spec;
}

SynthSpec SynthSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth spec " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

SynthSpec paired_tone_spec(std::size_t length, std::size_t window, double bin_a, double bin_b, double noise,
                           std::uint64_t seed) {
  SynthSpec spec;
  spec.name = "synth_pairs";
  spec.variates = 4;
  spec.length = length;
  spec.window = window;
  spec.noise = noise;
  spec.seed = seed;
  spec.tones = {{Tone{bin_a, 1.0, 0.0}}, {Tone{bin_a, 1.0, 1.3}}, {Tone{bin_b, 1.0, 0.4}}, {Tone{bin_b, 1.0, 2.2}}};
  return spec;
}

}  // namespace sattn
