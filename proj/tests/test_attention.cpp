#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sattn/analysis.hpp"
#include "sattn/attention.hpp"
#include "sattn/errors.hpp"
#include "sattn/linalg.hpp"
#include "sattn/ops.hpp"
#include "sattn/spectral.hpp"

using namespace sattn;

namespace {

AttentionOptions options(Mechanism m, std::size_t heads, std::size_t d, std::size_t f, std::size_t tokens) {
  AttentionOptions o;
  o.mechanism = m;
  o.heads = heads;
  o.model_dim = d;
  o.qk_dim = f;
  o.tokens = tokens;
  return o;
}

}  // namespace

TEST_CASE("scaled dot attention matches the loop oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t h = 1 + rng() % 4, n = 1 + rng() % 8, d = 1 + rng() % 6, dv = 1 + rng() % 5;
    const Tensor q = oracle::random_tensor({h, n, d}, rng, -3, 3), k = oracle::random_tensor({h, n, d}, rng, -3, 3);
    const Tensor v = oracle::random_tensor({h, n, dv}, rng);
    const double scale = std::sqrt(static_cast<double>(d));
    const auto [at, out] = scaled_dot_attention(q, k, v, scale);
    const auto [w_ref, out_ref] = oracle::attention(q, k, v, scale);
    CHECK(max_abs_diff(at.weights, w_ref) < 1e-12);
    CHECK(max_abs_diff(out, out_ref) < 1e-12);
  }
  CHECK_THROWS_AS(scaled_dot_attention(Tensor({1, 2, 2}), Tensor({1, 2, 2}), Tensor({1, 2, 2}), 0.0), ConfigError);
}

TEST_CASE("attention rows are distributions") {
  std::mt19937_64 rng(2);
  const Tensor q = oracle::random_tensor({3, 6, 4}, rng, -20, 20), k = oracle::random_tensor({3, 6, 4}, rng, -20, 20);
  const auto [at, out] = scaled_dot_attention(q, k, oracle::random_tensor({3, 6, 2}, rng), 2.0);
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 6; ++j) {
        CHECK(at.weights(h, i, j) >= 0.0);
        s += at.weights(h, i, j);
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("HCC is ReLU of a same-padded head convolution") {
  std::mt19937_64 rng(3);
  for (std::size_t k : {1u, 3u, 5u}) {
    const std::size_t h = 1 + rng() % 4, n = 1 + rng() % 8;
    const Tensor w = oracle::random_tensor({h, n, n}, rng, 0, 1);
    const HccKernel kernel(oracle::random_tensor({h, h, k, k}, rng));
    Tensor want = oracle::conv2d_same(w, kernel.weights);
    for (auto& x : want.storage()) x = std::max(x, 0.0);
    CHECK(max_abs_diff(hcc(w, kernel), want) < 1e-12);
  }
}

TEST_CASE("Dirac HCC kernel is the identity on nonnegative maps") {
  std::mt19937_64 rng(4);
  const Tensor w = oracle::random_tensor({3, 5, 5}, rng, 0, 1);
  CHECK(hcc(w, HccKernel::dirac(3, 3)) == w);
  CHECK(hcc(w, HccKernel::dirac(3, 1)) == w);
  CHECK_THROWS_AS(HccKernel::dirac(3, 2), ConfigError);
  CHECK_THROWS_AS(HccKernel(Tensor({2, 3, 3, 3})), ShapeError);
  CHECK_THROWS_AS(HccKernel(Tensor({2, 2, 4, 4})), ConfigError);
}

TEST_CASE("orthogonal init has orthonormal columns or rows") {
  for (auto [in, out] : {std::pair<std::size_t, std::size_t>{96, 49}, {16, 16}, {5, 9}, {1, 1}}) {
    const Tensor w = orthogonal_init(in, out, 17);
    CHECK(w.shape() == Shape{in, out});
    const Tensor g = in >= out ? matmul(transpose(w), w) : matmul(w, transpose(w));
    CHECK(max_abs_diff(g, Tensor::identity(std::min(in, out))) < 1e-12);
    for (double s : svd_singular_values(w)) CHECK(std::abs(s - 1.0) < 1e-10);
  }
  CHECK(orthogonal_init(8, 4, 1) == orthogonal_init(8, 4, 1));
  CHECK_FALSE(orthogonal_init(8, 4, 1) == orthogonal_init(8, 4, 2));
}

TEST_CASE("attention block parameter layouts") {
  const SeedSequence seeds(1);
  SUBCASE("conventional") {
    ParameterStore store;
    AttentionBlock b(store, "a", options(Mechanism::conventional, 2, 8, 0, 3), seeds);
    CHECK(store.find("a.query.weight") != nullptr);
    CHECK(store.find("a.mss_query") == nullptr);
    CHECK(b.score_scale() == doctest::Approx(2.0));
  }
  SUBCASE("fsatten with MSS") {
    ParameterStore store;
    AttentionBlock b(store, "a", options(Mechanism::fsatten, 2, 8, 9, 3), seeds);
    CHECK(store.at("a.mss_query").value.shape() == Shape{2, 3, 9});
    CHECK(store.at("a.mss_key").value == Tensor({2, 3, 9}, 1.0));
    CHECK(store.find("a.hcc_kernel") == nullptr);
    CHECK(b.score_scale() == doctest::Approx(3.0));
  }
  SUBCASE("soatten with dense ablation and HCC") {
    ParameterStore store;
    auto o = options(Mechanism::soatten, 2, 8, 4, 3);
    o.mss_enabled = false;
    AttentionBlock b(store, "a", o, seeds);
    CHECK(store.at("a.dense_query").value.shape() == Shape{2, 4, 4});
    CHECK(store.at("a.hcc_kernel").value.shape() == Shape{2, 2, 3, 3});
  }
  SUBCASE("invalid") {
    ParameterStore store;
    CHECK_THROWS_AS(AttentionBlock(store, "a", options(Mechanism::conventional, 3, 8, 0, 3), seeds), ConfigError);
    CHECK_THROWS_AS(AttentionBlock(store, "b", options(Mechanism::fsatten, 2, 8, 0, 3), seeds), ConfigError);
    auto o = options(Mechanism::soatten, 2, 8, 4, 3);
    o.kernel_size = 2;
    CHECK_THROWS_AS(AttentionBlock(store, "c", o, seeds), ConfigError);
  }
}

TEST_CASE("fsatten rejects a Q/K source of the wrong width or a missing source") {
  ParameterStore store;
  AttentionBlock b(store, "a", options(Mechanism::fsatten, 2, 8, 9, 3), SeedSequence(2));
  std::mt19937_64 rng(5);
  const Tensor hidden = oracle::random_tensor({3, 8}, rng);
  CHECK_THROWS_AS(fsatten_forward(oracle::random_tensor({3, 18}, rng), hidden, b), ShapeError);
  CHECK_NOTHROW(fsatten_forward(oracle::random_tensor({3, 16}, rng), hidden, b));
  Tape tape;
  CHECK_THROWS_AS(b.forward(tape, tape.constant(hidden), std::nullopt, nullptr), ConfigError);
  CHECK_THROWS_AS(fsatten_forward(oracle::random_tensor({4, 16}, rng), hidden, b), ShapeError);
}

TEST_CASE("identical spectra give uniform fsatten attention") {
  ParameterStore store;
  AttentionBlock b(store, "a", options(Mechanism::fsatten, 2, 4, 5, 3), SeedSequence(3));
  // Circular shifts of one sequence share their amplitude spectrum.
  const Tensor x = Tensor::matrix({{1, 2, 0, -1, 3, 5, 2, 1},
                                   {1, 1, 2, 0, -1, 3, 5, 2},
                                   {5, 2, 1, 1, 2, 0, -1, 3}});
  std::mt19937_64 rng(6);
  const auto [out, at] = fsatten_forward(x, oracle::random_tensor({3, 4}, rng), b);
  for (double w : at.weights.storage()) CHECK(std::abs(w - 1.0 / 3.0) < 1e-12);
  CHECK(at.mechanism == Mechanism::fsatten);
}

TEST_CASE("single-token conventional attention returns the projected value") {
  ParameterStore store;
  AttentionBlock b(store, "a", options(Mechanism::conventional, 2, 4, 0, 1), SeedSequence(4));
  std::mt19937_64 rng(7);
  for (auto* p : store.all()) p->value = oracle::random_tensor(p->value.shape(), rng);
  const Tensor x = oracle::random_tensor({1, 4}, rng);
  const auto [out, at] = conventional_mha_forward(x, b);
  Tensor v = matmul(x, b.value().weight().value);
  for (std::size_t j = 0; j < 4; ++j) v(0, j) += b.value().bias().value[j];
  Tensor want = matmul(v, b.output().weight().value);
  for (std::size_t j = 0; j < 4; ++j) want(0, j) += b.output().bias().value[j];
  CHECK(max_abs_diff(out, want) < 1e-12);
  CHECK(at.weights == Tensor({2, 1, 1}, 1.0));
}

TEST_CASE("soatten captures pre- and post-HCC weights") {
  ParameterStore store;
  auto o = options(Mechanism::soatten, 2, 4, 3, 5);
  AttentionBlock b(store, "a", o, SeedSequence(5));
  std::mt19937_64 rng(8);
  const Tensor tokens = oracle::random_tensor({5, 6}, rng);
  const auto [out, at] = soatten_forward(tokens, oracle::random_tensor({5, 4}, rng), orthogonal_init(6, 3, 9), b);
  REQUIRE(at.coupled.has_value());
  for (double w : at.coupled->storage()) CHECK(w >= 0.0);
  CHECK(at.effective() == *at.coupled);
  CHECK(out.shape() == Shape{5, 4});
}

TEST_CASE("fsatten block gradients on patch-shaped tokens") {
  // Exercises the spectral Q/K path with N patch tokens, the shape it would
  // see under the temporal architecture.
  for (bool mss : {true, false}) {
    ParameterStore store;
    auto o = options(Mechanism::fsatten, 2, 8, 3, 8);
    o.mss_enabled = mss;
    AttentionBlock b(store, "a", o, SeedSequence(6));
    std::mt19937_64 rng(10);
    for (auto* p : store.all()) p->value = oracle::random_tensor(p->value.shape(), rng);
    const Tensor patches = oracle::random_tensor({8, 4}, rng);
    const Tensor amp = amplitude_matrix(patches);
    const Tensor hidden = oracle::random_tensor({8, 8}, rng), target = oracle::random_tensor({8, 8}, rng);
    auto loss = [&]() {
      Tape tape;
      return mse_loss(b.forward(tape, tape.constant(hidden), tape.constant(amp), nullptr), tape.constant(target))
          .value()[0];
    };
    store.zero_grad();
    {
      Tape tape;
      tape.backward(mse_loss(b.forward(tape, tape.constant(hidden), tape.constant(amp), nullptr), tape.constant(target)));
    }
    for (Parameter* p : store.all()) {
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double saved = p->value[i];
        p->value[i] = saved + 1e-5;
        const double up = loss();
        p->value[i] = saved - 1e-5;
        const double down = loss();
        p->value[i] = saved;
        CHECK_MESSAGE(relative_error(p->grad[i], (up - down) / 2e-5) < 1e-4, p->name << "[" << i << "]");
      }
    }
  }
}
