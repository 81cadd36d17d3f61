#include "sattn/model.hpp"

#include <algorithm>
#include <cmath>

#include "sattn/errors.hpp"
#include "sattn/ops.hpp"
#include "sattn/spectral.hpp"

namespace sattn {

PatchSet patchify(std::span<const double> x, std::size_t P, std::size_t S) {
  const std::size_t L = x.size();
  if (P < 1 || P > L) {
    throw ConfigError("patchify: patch length " + std::to_string(P) + " must lie in [1, " + std::to_string(L) + "]");
  }
  if (S < 1 || S > P) throw ConfigError("patchify: stride must lie in [1, P]");
  const std::size_t n = (L - P) / S + 2;
  Tensor patches({n, P});
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < P; ++i) patches(j, i) = x[std::min(j * S + i, L - 1)];
  }
  return PatchSet{std::move(patches)};
}

std::pair<Tensor, InstanceStats> instance_normalize(const Tensor& x) {
  require_matrix(x, "instance_normalize");
  if (x.cols() < 2) throw ShapeError("instance_normalize: need at least 2 time steps");
  const std::size_t c = x.rows(), l = x.cols();
  InstanceStats stats{std::vector<double>(c), std::vector<double>(c)};
  Tensor out({c, l});
  for (std::size_t i = 0; i < c; ++i) {
    double mean = 0.0;
    for (std::size_t t = 0; t < l; ++t) mean += x(i, t);
    mean /= static_cast<double>(l);
    double var = 0.0;
    for (std::size_t t = 0; t < l; ++t) var += (x(i, t) - mean) * (x(i, t) - mean);
    var /= static_cast<double>(l);
    const double s = std::max(std::sqrt(var), kInstanceNormEps);
    stats.mean[i] = mean;
    stats.scale[i] = s;
    for (std::size_t t = 0; t < l; ++t) out(i, t) = (x(i, t) - mean) / s;
  }
  return {std::move(out), std::move(stats)};
}

Tensor instance_denormalize(const Tensor& y, const InstanceStats& stats) {
  require_matrix(y, "instance_denormalize");
  if (y.rows() != stats.mean.size()) throw ShapeError("instance_denormalize: row count differs from stats");
  Tensor out = y;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t t = 0; t < y.cols(); ++t) out(i, t) = y(i, t) * stats.scale[i] + stats.mean[i];
  }
  return out;
}

Tensor variate_embed(const Tensor& x, const Tensor& w) { return matmul(x, w); }

namespace {

Tensor dropout_mask(const Shape& shape, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  Tensor m(shape);
  for (auto& v : m.storage()) v = keep(rng) ? s : 0.0;
  return m;
}

Var maybe_dropout(Var x, double p, std::mt19937_64* rng) {
  if (rng == nullptr || p <= 0.0) return x;
  return apply_mask(x, dropout_mask(x.shape(), p, *rng));
}

}  // namespace

EncoderLayer::EncoderLayer(ParameterStore& store, const std::string& prefix, const AttentionOptions& attention,
                           const SeedSequence& seeds)
    : attention_(store, prefix + ".attn", attention, seeds),
      ffn_in_(store, prefix + ".ffn_in", attention.model_dim, 4 * attention.model_dim, seeds),
      ffn_out_(store, prefix + ".ffn_out", 4 * attention.model_dim, attention.model_dim, seeds) {
  const std::size_t d = attention.model_dim;
  norm1_gamma_ = &store.add(prefix + ".norm1.gamma", Tensor({d}, 1.0));
  norm1_beta_ = &store.add(prefix + ".norm1.beta", Tensor({d}));
  norm2_gamma_ = &store.add(prefix + ".norm2.gamma", Tensor({d}, 1.0));
  norm2_beta_ = &store.add(prefix + ".norm2.beta", Tensor({d}));
}

Var EncoderLayer::forward(Tape& tape, Var hidden, std::optional<Var> qk_source, double dropout,
                          std::mt19937_64* dropout_rng, AttentionTensor* capture) const {
  Var a = maybe_dropout(attention_.forward(tape, hidden, qk_source, capture), dropout, dropout_rng);
  Var h1 = layer_norm_rows(add(hidden, a), tape.param(*norm1_gamma_), tape.param(*norm1_beta_));
  Var f = ffn_out_.forward(tape, gelu(ffn_in_.forward(tape, h1)));
  f = maybe_dropout(f, dropout, dropout_rng);
  return layer_norm_rows(add(h1, f), tape.param(*norm2_gamma_), tape.param(*norm2_beta_));
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  const SeedSequence seeds(config_.seed);
  const std::size_t F = config_.resolved_F();
  const bool variate = config_.architecture == Architecture::variate;

  embed_ = Linear(store_, "embed", config_.token_length(), config_.D, seeds);
  if (config_.mechanism == Mechanism::soatten) {
    const std::uint64_t orth_seed = seeds.stream("init/orth_embedding")();
    orth_embedding_ = &store_.add("orth_embedding", orthogonal_init(config_.token_length(), F, orth_seed));
  }
  AttentionOptions opts;
  opts.mechanism = config_.mechanism;
  opts.heads = config_.H;
  opts.model_dim = config_.D;
  opts.qk_dim = F;
  opts.tokens = config_.tokens();
  opts.kernel_size = config_.kernel_K;
  opts.mss_enabled = config_.mss_enabled;
  opts.hcc_enabled = config_.hcc_enabled;
  layers_.reserve(config_.layers);
  for (std::size_t i = 0; i < config_.layers; ++i) {
    layers_.emplace_back(store_, "layers." + std::to_string(i), opts, seeds);
  }
  const std::size_t head_in = variate ? config_.D : config_.patch_count() * config_.D;
  head_ = Linear(store_, "head", head_in, config_.T, seeds);
}

Var Model::encode(Tape& tape, Var hidden, std::optional<Var> qk_source, std::size_t group,
                  const ForwardOptions& options) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    AttentionTensor* capture = nullptr;
    if (options.capture != nullptr) {
      options.capture->emplace_back();
      capture = &options.capture->back();
    }
    if (options.qk_source_ids != nullptr && qk_source) options.qk_source_ids->push_back(qk_source->id());
    hidden = layers_[i].forward(tape, hidden, qk_source, config_.dropout, options.dropout_rng, capture);
    if (capture != nullptr) {
      capture->layer_index = i;
      capture->group = group;
    }
  }
  return hidden;
}

Var Model::forward(Tape& tape, const Tensor& x, const ForwardOptions& options) const {
  require_matrix(x, "forecast");
  if (x.rows() != config_.C || x.cols() != config_.L) {
    throw ShapeError("forecast: expected input " + std::to_string(config_.C) + "x" + std::to_string(config_.L) +
                     ", got " + shape_to_string(x.shape()));
  }
  auto [xn, stats] = instance_normalize(x);
  std::optional<Var> orth;
  if (orth_embedding_ != nullptr) orth = tape.param(*orth_embedding_);

  Var y_norm = [&]() -> Var {
    if (config_.architecture == Architecture::variate) {
      Var xv = tape.constant(xn);
      std::optional<Var> qk;
      if (config_.mechanism == Mechanism::fsatten) qk = tape.constant(amplitude_matrix(xn));
      if (orth) qk = matmul(xv, *orth);
      Var h = encode(tape, embed_.forward(tape, xv), qk, 0, options);
      return head_.forward(tape, h);
    }
    std::vector<Var> rows;
    const std::size_t n = config_.patch_count();
    for (std::size_t c = 0; c < config_.C; ++c) {
      Var patches = tape.constant(patchify(xn.row(c), config_.P, config_.S).patches);
      std::optional<Var> qk;
      if (config_.mechanism == Mechanism::fsatten) qk = tape.constant(amplitude_matrix(patches.value()));
      if (orth) qk = matmul(patches, *orth);
      Var h = encode(tape, embed_.forward(tape, patches), qk, c, options);
      rows.push_back(head_.forward(tape, reshape(h, {1, n * config_.D})));
    }
    return concat_rows(rows);
  }();

  Tensor s({config_.C, config_.T}), m({config_.C, config_.T});
  for (std::size_t c = 0; c < config_.C; ++c) {
    for (std::size_t t = 0; t < config_.T; ++t) {
      s(c, t) = stats.scale[c];
      m(c, t) = stats.mean[c];
    }
  }
  return add(hadamard(y_norm, tape.constant(s)), tape.constant(m));
}

Tensor Model::forecast(const Tensor& x) const {
  Tape tape;
  return forward(tape, x).value();
}

Tensor Model::forecast(const Tensor& x, std::vector<AttentionTensor>& capture) const {
  Tape tape;
  ForwardOptions opts;
  opts.capture = &capture;
  return forward(tape, x, opts).value();
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  c.validate();
  const std::size_t D = c.D, F = c.resolved_F(), H = c.H, N = c.tokens(), K = c.kernel_K;
  std::size_t total = c.token_length() * D + D;
  if (c.mechanism == Mechanism::soatten) total += c.token_length() * F;
  std::size_t layer = 2 * (D * D + D);  // value, output
  if (c.mechanism == Mechanism::conventional) {
    layer += 2 * (D * D + D);
  } else {
    layer += c.mss_enabled ? 2 * H * N * F : 2 * H * F * F;
    if (c.mechanism == Mechanism::soatten && c.hcc_enabled) layer += H * H * K * K;
  }
  layer += (D * 4 * D + 4 * D) + (4 * D * D + D) + 4 * D;
  total += c.layers * layer;
  const std::size_t head_in = c.architecture == Architecture::variate ? D : c.patch_count() * D;
  total += head_in * c.T + c.T;
  return total;
}

}  // namespace sattn
