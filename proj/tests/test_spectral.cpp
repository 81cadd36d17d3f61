#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sattn/errors.hpp"
#include "sattn/ops.hpp"
#include "sattn/spectral.hpp"

using namespace sattn;

namespace {

std::vector<double> random_series(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

}  // namespace

TEST_CASE("fft agrees with the direct DFT for every length up to 128") {
  std::mt19937_64 rng(1);
  for (std::size_t n = 1; n <= 128; ++n) {
    const auto x = random_series(n, rng);
    const auto a = fft(x), b = dft_naive(x);
    REQUIRE(a.size() == n);
    double err = 0.0;
    for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(a[k] - b[k]));
    CHECK_MESSAGE(err < 1e-9, "L=" << n);
  }
}

TEST_CASE("rfft amplitudes match an extended-precision oracle") {
  std::mt19937_64 rng(2);
  for (std::size_t n : {2u, 3u, 7u, 16u, 49u, 96u, 97u, 128u}) {
    const auto x = random_series(n, rng);
    const auto got = rfft_amplitudes(x).amplitudes;
    const auto want = oracle::dft_amplitudes(x);
    REQUIRE(got.size() == spectrum_bins(n));
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - want[k]) < 1e-9);
  }
}

TEST_CASE("real-input bins are conjugate symmetric with real DC and Nyquist") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {8u, 9u}) {
    const auto x = random_series(n, rng);
    const auto full = fft(x);
    for (std::size_t k = 1; k < n; ++k) CHECK(std::abs(full[k] - std::conj(full[n - k])) < 1e-12);
    const auto rs = rfft_amplitudes(x);
    CHECK(rs.spectrum.bins.front().imag() == 0.0);
    if (n % 2 == 0) CHECK(rs.spectrum.bins.back().imag() == 0.0);
    CHECK(rs.spectrum.source_length == n);
  }
}

TEST_CASE("known spectra") {
  SUBCASE("constant sequence concentrates at DC") {
    const std::vector<double> x(12, 2.5);
    const auto a = rfft_amplitudes(x).amplitudes;
    CHECK(a[0] == doctest::Approx(30.0));
    for (std::size_t k = 1; k < a.size(); ++k) CHECK(a[k] < 1e-12);
  }
  SUBCASE("cosine at bin 3 has amplitude L/2") {
    std::vector<double> x(32);
    for (std::size_t t = 0; t < 32; ++t) x[t] = std::cos(2.0 * std::numbers::pi * 3.0 * t / 32.0);
    const auto a = rfft_amplitudes(x).amplitudes;
    CHECK(a[3] == doctest::Approx(16.0));
    for (std::size_t k = 0; k < a.size(); ++k)
      if (k != 3) CHECK(a[k] < 1e-10);
  }
  SUBCASE("length 2") {
    const std::vector<double> x{1.0, 3.0};
    const auto a = rfft_amplitudes(x).amplitudes;
    CHECK(a[0] == doctest::Approx(4.0));
    CHECK(a[1] == doctest::Approx(2.0));
  }
}

TEST_CASE("Parseval identity over the one-sided spectrum") {
  std::mt19937_64 rng(4);
  for (std::size_t n = 2; n <= 64; ++n) {
    const auto x = random_series(n, rng);
    const auto a = rfft_amplitudes(x).amplitudes;
    double time = 0.0, freq = 0.0;
    for (double v : x) time += v * v;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
      freq += (unpaired ? 1.0 : 2.0) * a[k] * a[k];
    }
    CHECK(std::abs(time - freq / static_cast<double>(n)) < 1e-9);
  }
}

TEST_CASE("amplitudes are invariant to circular shifts") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng() % 90;
    const auto x = random_series(n, rng);
    std::vector<double> y(n);
    const std::size_t shift = rng() % n;
    for (std::size_t t = 0; t < n; ++t) y[(t + shift) % n] = x[t];
    const auto a = rfft_amplitudes(x).amplitudes, b = rfft_amplitudes(y).amplitudes;
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-9);
  }
}

TEST_CASE("short or empty inputs are rejected") {
  CHECK_THROWS_AS(rfft_amplitudes(std::vector<double>{1.0}), ShapeError);
  CHECK_THROWS_AS(rfft_amplitudes(std::vector<double>{}), ShapeError);
}

TEST_CASE("amplitude matrix stacks per-token spectra") {
  std::mt19937_64 rng(6);
  const Tensor x = oracle::random_tensor({3, 10}, rng);
  const Tensor a = amplitude_matrix(x);
  CHECK(a.shape() == Shape{3, 6});
  for (std::size_t i = 0; i < 3; ++i) {
    const auto row = rfft_amplitudes(x.row(i)).amplitudes;
    for (std::size_t k = 0; k < 6; ++k) CHECK(a(i, k) == row[k]);
  }
}

TEST_CASE("MSS starts as the identity scaling and scales elementwise") {
  std::mt19937_64 rng(7);
  const Tensor a = oracle::random_tensor({4, 5}, rng);
  const MssWeights ones = MssWeights::ones(2, 4, 5);
  CHECK(ones.tensor().shape() == Shape{2, 4, 5});
  CHECK(mss_project(a, ones, 1) == a);
  Tensor w = oracle::random_tensor({2, 4, 5}, rng);
  const MssWeights mw(w);
  const Tensor p = mss_project(a, mw, 1);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 5; ++k) CHECK(p(i, k) == a(i, k) * w(1, i, k));
  CHECK_THROWS_AS(mss_project(oracle::random_tensor({4, 6}, rng), mw, 0), ShapeError);

  Tape tape;
  Parameter hw("w", mw.head(0));
  Var out = mss_project(tape.constant(a), tape.param(hw));
  tape.backward(sum(out));
  CHECK(hw.grad == a);
}
