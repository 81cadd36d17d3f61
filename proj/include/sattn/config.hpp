#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "sattn/attention.hpp"

namespace sattn {

enum class Architecture { temporal, variate };

std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view name);

/// Every architectural and training hyperparameter of a forecaster.
///
/// Text form is flat `key=value` lines (`#` starts a comment). Keys match the
/// field names in the table below; `F=0` means "resolve automatically".
struct ModelConfig {
  Architecture architecture = Architecture::variate;
  Mechanism mechanism = Mechanism::conventional;
  std::size_t L = 96;        // lookback
  std::size_t T = 24;        // horizon
  std::size_t C = 7;         // variates
  std::size_t P = 16;        // patch length
  std::size_t S = 8;         // patch stride
  std::size_t H = 4;         // heads
  std::size_t D = 32;        // hidden width
  std::size_t F = 0;         // Q/K space; 0 = floor(L/2)+1 for fsatten, 32 for soatten
  std::size_t kernel_K = 3;  // HCC kernel size
  std::size_t layers = 2;
  double dropout = 0.2;
  bool mss_enabled = true;
  bool hcc_enabled = true;
  std::uint64_t seed = 2024;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double train_ratio = 0.0;  // 0 = dataset default (6:2:2 for ETT*, 7:1:2 otherwise)
  double val_ratio = 0.0;

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;

  /// F after defaults are applied.
  std::size_t resolved_F() const;
  /// Patch count floor((L-P)/S) + 2.
  std::size_t patch_count() const;
  /// Tokens per attention call: C (variate) or patch count (temporal).
  std::size_t tokens() const;
  /// Length of each raw token: L (variate) or P (temporal).
  std::size_t token_length() const;

  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);
  static ModelConfig load(const std::string& path);
  /// Applies SPECTRAL_ATTN_SEED if set.
  void apply_env_overrides();
  /// Stable 16-hex-digit digest of to_text().
  std::string hash() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parses flat key=value text. Throws ConfigError on malformed lines or duplicates.
std::map<std::string, std::string> parse_key_values(std::string_view text);

}  // namespace sattn
