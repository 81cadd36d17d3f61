#include "sattn/attention.hpp"

#include <cmath>

#include "sattn/errors.hpp"
#include "sattn/linalg.hpp"
#include "sattn/ops.hpp"
#include "sattn/spectral.hpp"

namespace sattn {

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::conventional: return "conventional";
    case Mechanism::fsatten: return "fsatten";
    case Mechanism::soatten: return "soatten";
  }
  return "unknown";
}

Mechanism parse_mechanism(std::string_view name) {
  if (name == "conventional") return Mechanism::conventional;
  if (name == "fsatten") return Mechanism::fsatten;
  if (name == "soatten") return Mechanism::soatten;
  throw ConfigError("unknown mechanism '" + std::string(name) + "' (expected conventional|fsatten|soatten)");
}

HccKernel::HccKernel(Tensor w) : weights(std::move(w)) {
  if (weights.rank() != 4 || weights.dim(0) != weights.dim(1) || weights.dim(2) != weights.dim(3)) {
    throw ShapeError("HccKernel: expected {H, H, K, K}, got " + shape_to_string(weights.shape()));
  }
  if (weights.dim(2) % 2 == 0) throw ConfigError("HccKernel: kernel size must be odd");
}

HccKernel HccKernel::dirac(std::size_t heads, std::size_t size) {
  if (size % 2 == 0) throw ConfigError("HccKernel: kernel size must be odd");
  Tensor w({heads, heads, size, size});
  const std::size_t c = size / 2;
  for (std::size_t h = 0; h < heads; ++h) w[((h * heads + h) * size + c) * size + c] = 1.0;
  return HccKernel(std::move(w));
}

HeadAttention attend_heads(std::span<const Var> q, std::span<const Var> k, std::span<const Var> v,
                           double score_scale, const Var* hcc_kernel) {
  if (!(score_scale > 0.0)) throw ConfigError("attention: score scale must be positive");
  if (q.empty() || q.size() != k.size() || q.size() != v.size()) {
    throw ShapeError("attention: Q, K and V must have the same positive number of heads");
  }
  HeadAttention out;
  const double inv = 1.0 / score_scale;
  for (std::size_t h = 0; h < q.size(); ++h) {
    require_matrix(q[h].value(), "attention");
    require_matrix(k[h].value(), "attention");
    if (q[h].value().cols() != k[h].value().cols()) throw ShapeError("attention: Q and K widths differ");
    if (k[h].value().rows() != v[h].value().rows() || q[h].value().rows() != q.front().value().rows()) {
      throw ShapeError("attention: heads must share the token count");
    }
    out.weights.push_back(softmax_rows(scale(matmul(q[h], transpose(k[h])), inv)));
  }
  std::vector<Var> effective = out.weights;
  if (hcc_kernel != nullptr) {
    out.coupled = hcc(stack(out.weights), *hcc_kernel);
    for (std::size_t h = 0; h < q.size(); ++h) effective[h] = select(*out.coupled, h);
  }
  for (std::size_t h = 0; h < q.size(); ++h) out.outputs.push_back(matmul(effective[h], v[h]));
  return out;
}

Var hcc(Var weights, Var kernel) {
  if (weights.shape().size() != 3 || kernel.shape().size() != 4 || kernel.shape()[0] != weights.shape()[0] ||
      kernel.shape()[1] != weights.shape()[0]) {
    throw ShapeError("hcc: weights " + shape_to_string(weights.shape()) + " incompatible with kernel " +
                     shape_to_string(kernel.shape()));
  }
  return relu(conv2d_same(weights, kernel));
}

Tensor hcc(const Tensor& weights, const HccKernel& kernel) {
  Tape tape;
  return hcc(tape.constant(weights), tape.constant(kernel.weights)).value();
}

namespace {

Tensor head_slice(const Tensor& t, std::size_t h) {
  const std::size_t block = t.dim(1) * t.dim(2);
  std::vector<double> data(t.storage().begin() + static_cast<std::ptrdiff_t>(h * block),
                           t.storage().begin() + static_cast<std::ptrdiff_t>((h + 1) * block));
  return Tensor({t.dim(1), t.dim(2)}, std::move(data));
}

Tensor stack_values(std::span<const Var> parts) {
  Tape tape;
  std::vector<Var> c;
  for (const auto& p : parts) c.push_back(tape.constant(p.value()));
  return stack(c).value();
}

}  // namespace

std::pair<AttentionTensor, Tensor> scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                                        double score_scale) {
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3) throw ShapeError("scaled_dot_attention: expected {H, N, d}");
  if (q.dim(0) != k.dim(0) || q.dim(0) != v.dim(0)) throw ShapeError("scaled_dot_attention: head counts differ");
  Tape tape;
  std::vector<Var> qs, ks, vs;
  for (std::size_t h = 0; h < q.dim(0); ++h) {
    qs.push_back(tape.constant(head_slice(q, h)));
    ks.push_back(tape.constant(head_slice(k, h)));
    vs.push_back(tape.constant(head_slice(v, h)));
  }
  auto res = attend_heads(qs, ks, vs, score_scale, nullptr);
  AttentionTensor at;
  at.weights = stack_values(res.weights);
  return {std::move(at), stack_values(res.outputs)};
}

Tensor orthogonal_init(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
  if (in_dim == 0 || out_dim == 0) throw ConfigError("orthogonal_init: dimensions must be positive");
  auto rng = SeedSequence(seed).stream("orthogonal");
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor g({in_dim, out_dim});
  for (auto& x : g.storage()) x = normal(rng);
  if (in_dim >= out_dim) return orthonormal_columns(g);
  return transpose(orthonormal_columns(transpose(g)));
}

AttentionBlock::AttentionBlock(ParameterStore& store, const std::string& prefix, const AttentionOptions& options,
                               const SeedSequence& seeds)
    : options_(options) {
  const std::size_t d = options_.model_dim, heads = options_.heads;
  if (heads == 0 || d == 0) throw ConfigError("attention: heads and model width must be positive");
  if (d % heads != 0) {
    throw ConfigError("attention: model width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const bool spectral = options_.mechanism != Mechanism::conventional;
  if (spectral && options_.qk_dim == 0) throw ConfigError("attention: F must be positive");
  if (options_.mechanism == Mechanism::soatten && options_.hcc_enabled && options_.kernel_size % 2 == 0) {
    throw ConfigError("attention: HCC kernel size must be odd");
  }

  if (!spectral) {
    query_ = Linear(store, prefix + ".query", d, d, seeds);
    key_ = Linear(store, prefix + ".key", d, d, seeds);
  } else if (options_.mss_enabled) {
    const Shape shape{heads, options_.tokens, options_.qk_dim};
    mss_q_ = &store.add(prefix + ".mss_query", Tensor(shape, 1.0));
    mss_k_ = &store.add(prefix + ".mss_key", Tensor(shape, 1.0));
  } else {
    const Shape shape{heads, options_.qk_dim, options_.qk_dim};
    auto rq = seeds.stream("init/" + prefix + ".dense_query");
    auto rk = seeds.stream("init/" + prefix + ".dense_key");
    dense_q_ = &store.add(prefix + ".dense_query", uniform_fan_in(shape, options_.qk_dim, rq));
    dense_k_ = &store.add(prefix + ".dense_key", uniform_fan_in(shape, options_.qk_dim, rk));
  }
  value_ = Linear(store, prefix + ".value", d, d, seeds);
  output_ = Linear(store, prefix + ".output", d, d, seeds);

  if (options_.mechanism == Mechanism::soatten && options_.hcc_enabled) {
    Tensor w = HccKernel::dirac(heads, options_.kernel_size).weights;
    auto rng = seeds.stream("init/" + prefix + ".hcc_kernel");
    std::normal_distribution<double> noise(0.0, 0.01);
    for (auto& x : w.storage()) x += noise(rng);
    kernel_ = &store.add(prefix + ".hcc_kernel", std::move(w));
  }
}

double AttentionBlock::score_scale() const {
  const double width = options_.mechanism == Mechanism::conventional
                           ? static_cast<double>(options_.model_dim / options_.heads)
                           : static_cast<double>(options_.qk_dim);
  return std::sqrt(width);
}

Var AttentionBlock::forward(Tape& tape, Var hidden, std::optional<Var> qk_source, AttentionTensor* capture) const {
  require_matrix(hidden.value(), "attention");
  const std::size_t d = options_.model_dim, heads = options_.heads, dv = d / heads;
  if (hidden.value().cols() != d) {
    throw ShapeError("attention: hidden width " + std::to_string(hidden.value().cols()) + " != D=" +
                     std::to_string(d));
  }
  const std::size_t tokens = hidden.value().rows();

  Var values = value_.forward(tape, hidden);
  std::vector<Var> qs, ks, vs;
  for (std::size_t h = 0; h < heads; ++h) vs.push_back(slice_cols(values, h * dv, dv));

  if (options_.mechanism == Mechanism::conventional) {
    Var q = query_.forward(tape, hidden);
    Var k = key_.forward(tape, hidden);
    for (std::size_t h = 0; h < heads; ++h) {
      qs.push_back(slice_cols(q, h * dv, dv));
      ks.push_back(slice_cols(k, h * dv, dv));
    }
  } else {
    if (!qk_source) throw ConfigError("attention: " + std::string(to_string(options_.mechanism)) + " needs a Q/K source");
    const Tensor& src = qk_source->value();
    require_matrix(src, "attention");
    if (src.cols() != options_.qk_dim) {
      throw ShapeError("attention: Q/K source has F=" + std::to_string(src.cols()) + " but weights expect F=" +
                       std::to_string(options_.qk_dim));
    }
    if (src.rows() != tokens) throw ShapeError("attention: Q/K source and hidden state disagree on token count");
    if (options_.mss_enabled) {
      if (tokens != options_.tokens) {
        throw ShapeError("attention: MSS weights sized for " + std::to_string(options_.tokens) + " tokens, got " +
                         std::to_string(tokens));
      }
      Var wq = tape.param(*mss_q_);
      Var wk = tape.param(*mss_k_);
      for (std::size_t h = 0; h < heads; ++h) {
        qs.push_back(hadamard(*qk_source, select(wq, h)));
        ks.push_back(hadamard(*qk_source, select(wk, h)));
      }
    } else {
      Var wq = tape.param(*dense_q_);
      Var wk = tape.param(*dense_k_);
      for (std::size_t h = 0; h < heads; ++h) {
        qs.push_back(matmul(*qk_source, select(wq, h)));
        ks.push_back(matmul(*qk_source, select(wk, h)));
      }
    }
  }

  std::optional<Var> kernel;
  if (options_.mechanism == Mechanism::soatten && options_.hcc_enabled) {
    if (kernel_ == nullptr) throw ConfigError("attention: HCC enabled but no kernel present");
    kernel = tape.param(*kernel_);
  }
  auto res = attend_heads(qs, ks, vs, score_scale(), kernel ? &*kernel : nullptr);
  if (capture != nullptr) {
    capture->mechanism = options_.mechanism;
    capture->weights = stack_values(res.weights);
    capture->coupled.reset();
    if (res.coupled) capture->coupled = res.coupled->value();
  }
  return output_.forward(tape, concat_cols(res.outputs));
}

std::pair<Tensor, AttentionTensor> fsatten_forward(const Tensor& x_raw, const Tensor& hidden,
                                                   const AttentionBlock& block) {
  if (block.options().mechanism != Mechanism::fsatten) throw ConfigError("fsatten_forward: block is not fsatten");
  Tape tape;
  AttentionTensor at;
  Var out = block.forward(tape, tape.constant(hidden), tape.constant(amplitude_matrix(x_raw)), &at);
  return {out.value(), std::move(at)};
}

std::pair<Tensor, AttentionTensor> soatten_forward(const Tensor& tokens_raw, const Tensor& hidden,
                                                   const Tensor& orthogonal_embedding,
                                                   const AttentionBlock& block) {
  if (block.options().mechanism != Mechanism::soatten) throw ConfigError("soatten_forward: block is not soatten");
  Tape tape;
  AttentionTensor at;
  Var embedded = tape.constant(matmul(tokens_raw, orthogonal_embedding));
  Var out = block.forward(tape, tape.constant(hidden), embedded, &at);
  return {out.value(), std::move(at)};
}

std::pair<Tensor, AttentionTensor> conventional_mha_forward(const Tensor& hidden, const AttentionBlock& block) {
  if (block.options().mechanism != Mechanism::conventional) {
    throw ConfigError("conventional_mha_forward: block is not conventional");
  }
  Tape tape;
  AttentionTensor at;
  Var out = block.forward(tape, tape.constant(hidden), std::nullopt, &at);
  return {out.value(), std::move(at)};
}

}  // namespace sattn
