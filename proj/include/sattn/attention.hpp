#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sattn/autodiff.hpp"
#include "sattn/parameters.hpp"
#include "sattn/rng.hpp"
#include "sattn/tensor.hpp"

namespace sattn {

enum class Mechanism { conventional, fsatten, soatten };

std::string_view to_string(Mechanism m);
/// Throws ConfigError for unknown names.
Mechanism parse_mechanism(std::string_view name);

/// Per-layer attention weights, H x N x N.
struct AttentionTensor {
  Tensor weights;                // softmax output; rows sum to one
  std::optional<Tensor> coupled; // after head-coupling convolution, if applied
  std::size_t layer_index = 0;
  std::size_t group = 0;         // variate index under the temporal architecture
  Mechanism mechanism = Mechanism::conventional;

  /// The weights that actually multiply V.
  const Tensor& effective() const { return coupled ? *coupled : weights; }
};

/// Convolution kernel over attention heads, {H, H, K, K} with K odd.
struct HccKernel {
  Tensor weights;

  explicit HccKernel(Tensor w);
  /// kernel[h][h][center] = 1, zero elsewhere.
  static HccKernel dirac(std::size_t heads, std::size_t size);
  std::size_t heads() const { return weights.dim(0); }
  std::size_t size() const { return weights.dim(2); }
};

/// softmax(Q_h K_h^T / scale) per head, then weights_h * V_h.
/// Q, K: {H, N, d}; V: {H, N, dv}. Throws ConfigError for scale <= 0.
std::pair<AttentionTensor, Tensor> scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                                        double score_scale);

/// ReLU(conv_{H->H}(weights)), stride 1, zero padding (K-1)/2.
Tensor hcc(const Tensor& weights, const HccKernel& kernel);
Var hcc(Var weights, Var kernel);

/// Matrix with orthonormal columns (in >= out) or rows (in < out), from the
/// QR factor of a seeded standard-normal draw.
Tensor orthogonal_init(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

/// Recorded multi-head attention over per-head operands.
struct HeadAttention {
  std::vector<Var> weights;  // per head N x N (softmax)
  std::optional<Var> coupled; // {H, N, N} after HCC
  std::vector<Var> outputs;  // per head N x dv
};
HeadAttention attend_heads(std::span<const Var> q, std::span<const Var> k, std::span<const Var> v,
                           double score_scale, const Var* hcc_kernel);

struct AttentionOptions {
  Mechanism mechanism = Mechanism::conventional;
  std::size_t heads = 1;
  std::size_t model_dim = 8;   // D
  std::size_t qk_dim = 0;      // F for fsatten/soatten
  std::size_t tokens = 1;      // rows of the MSS weights
  std::size_t kernel_size = 3; // HCC K
  bool mss_enabled = true;     // false: dense F x F map per head (linear ablation)
  bool hcc_enabled = true;     // soatten only
};

/// One attention sublayer with its parameters.
///
/// Q/K come from `qk_source` for fsatten (amplitude matrix) and soatten
/// (orthogonal embedding, tokens x F); conventional attention projects the
/// hidden state itself. V always comes from a linear map of the hidden state,
/// split into H contiguous blocks of D/H, and the concatenated head outputs are
/// mixed by a final D x D linear layer.
class AttentionBlock {
 public:
  AttentionBlock(ParameterStore& store, const std::string& prefix, const AttentionOptions& options,
                 const SeedSequence& seeds);

  /// Returns the mixed output (tokens x D). If `capture` is non-null it
  /// receives the attention weights of this call.
  Var forward(Tape& tape, Var hidden, std::optional<Var> qk_source, AttentionTensor* capture) const;

  const AttentionOptions& options() const { return options_; }
  double score_scale() const;

  const Linear& query() const { return query_; }
  const Linear& key() const { return key_; }
  const Linear& value() const { return value_; }
  const Linear& output() const { return output_; }
  Parameter* mss_query() const { return mss_q_; }
  Parameter* mss_key() const { return mss_k_; }
  Parameter* dense_query() const { return dense_q_; }
  Parameter* dense_key() const { return dense_k_; }
  Parameter* hcc_kernel() const { return kernel_; }

 private:
  AttentionOptions options_;
  Linear query_, key_;  // conventional only
  Linear value_, output_;
  Parameter* mss_q_ = nullptr;
  Parameter* mss_k_ = nullptr;
  Parameter* dense_q_ = nullptr;
  Parameter* dense_k_ = nullptr;
  Parameter* kernel_ = nullptr;
};

/// Tensor-level forwards with a throwaway tape.
std::pair<Tensor, AttentionTensor> fsatten_forward(const Tensor& x_raw, const Tensor& hidden,
                                                   const AttentionBlock& block);
std::pair<Tensor, AttentionTensor> soatten_forward(const Tensor& tokens_raw, const Tensor& hidden,
                                                   const Tensor& orthogonal_embedding,
                                                   const AttentionBlock& block);
std::pair<Tensor, AttentionTensor> conventional_mha_forward(const Tensor& hidden, const AttentionBlock& block);

}  // namespace sattn
