#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "sattn/attention.hpp"
#include "sattn/autodiff.hpp"
#include "sattn/config.hpp"
#include "sattn/parameters.hpp"
#include "sattn/tensor.hpp"

namespace sattn {

/// Patches of one series, stored as N x P (one patch per row).
struct PatchSet {
  Tensor patches;
  std::size_t count() const { return patches.rows(); }
  std::size_t length() const { return patches.cols(); }
};

/// Splits x into floor((L-P)/S)+2 patches starting at j*S. Positions past
/// the end repeat the last observed value. Throws ConfigError unless
/// 1 <= P <= L and 1 <= S <= P.
PatchSet patchify(std::span<const double> x, std::size_t P, std::size_t S);

struct InstanceStats {
  std::vector<double> mean;
  std::vector<double> scale;  // max(population std, eps)
};

inline constexpr double kInstanceNormEps = 1e-5;

/// Per-row standardization of a C x L window.
std::pair<Tensor, InstanceStats> instance_normalize(const Tensor& x);
/// Inverse of instance_normalize applied to any C x n matrix.
Tensor instance_denormalize(const Tensor& y, const InstanceStats& stats);

/// X (C x L) times W (L x D). Throws ShapeError on mismatch.
Tensor variate_embed(const Tensor& x, const Tensor& w);

/// Post-norm encoder block: attention sublayer, then a 4D GELU FFN.
class EncoderLayer {
 public:
  EncoderLayer(ParameterStore& store, const std::string& prefix, const AttentionOptions& attention,
               const SeedSequence& seeds);

  /// `dropout_rng` null or `dropout` zero disables dropout.
  Var forward(Tape& tape, Var hidden, std::optional<Var> qk_source, double dropout, std::mt19937_64* dropout_rng,
              AttentionTensor* capture) const;

  const AttentionBlock& attention() const { return attention_; }

 private:
  AttentionBlock attention_;
  Linear ffn_in_, ffn_out_;
  Parameter* norm1_gamma_ = nullptr;
  Parameter* norm1_beta_ = nullptr;
  Parameter* norm2_gamma_ = nullptr;
  Parameter* norm2_beta_ = nullptr;
};

/// Per-call switches for Model::forward.
struct ForwardOptions {
  std::mt19937_64* dropout_rng = nullptr;  // non-null enables dropout
  std::vector<AttentionTensor>* capture = nullptr;
  /// Tape ids of the Q/K source used by each attention call, in call order.
  std::vector<std::size_t>* qk_source_ids = nullptr;
};

class Model {
 public:
  /// Validates the config and initializes every parameter from its seed.
  explicit Model(const ModelConfig& config);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  /// X: C x L raw window. Returns the C x T forecast in the input's units.
  Var forward(Tape& tape, const Tensor& x, const ForwardOptions& options = {}) const;
  Tensor forecast(const Tensor& x) const;
  /// Forecast plus the attention weights of every layer (and variate group).
  Tensor forecast(const Tensor& x, std::vector<AttentionTensor>& capture) const;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const std::vector<EncoderLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const { return store_.scalar_count(); }

 private:
  Var encode(Tape& tape, Var hidden, std::optional<Var> qk_source, std::size_t group,
             const ForwardOptions& options) const;

  ModelConfig config_;
  ParameterStore store_;
  Linear embed_;
  Parameter* orth_embedding_ = nullptr;  // soatten only
  std::vector<EncoderLayer> layers_;
  Linear head_;
};

/// Closed-form parameter count for a config, used to cross-check the model.
std::size_t expected_parameter_count(const ModelConfig& config);

}  // namespace sattn
