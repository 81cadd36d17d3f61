#include "sattn/spectral.hpp"

#include <cmath>
#include <numbers>

#include "sattn/errors.hpp"
#include "sattn/ops.hpp"

namespace sattn {

std::vector<Complex> dft_naive(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("dft_naive: empty input");
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k*t mod n first so the angle stays in [0, 2 pi).
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      re += x[t] * std::cos(angle);
      im += x[t] * std::sin(angle);
    }
    out[k] = {re, im};
  }
  return out;
}

namespace {

std::size_t smallest_factor(std::size_t n) {
  for (std::size_t p = 2; p * p <= n; ++p)
    if (n % p == 0) return p;
  return n;
}

class MixedRadix {
 public:
  explicit MixedRadix(std::size_t n) : n_(n), twiddle_(n) {
    for (std::size_t e = 0; e < n; ++e) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(e) / static_cast<double>(n);
      twiddle_[e] = {std::cos(angle), std::sin(angle)};
    }
  }

  // DFT of length `len` over in[0], in[stride], ...; writes out[0..len).
  void run(const Complex* in, std::size_t stride, std::size_t len, Complex* out) const {
    if (len == 1) {
      out[0] = in[0];
      return;
    }
    const std::size_t step = n_ / len;  // W_len^e == W_n^(e*step)
    const std::size_t p = smallest_factor(len);
    if (p == len) {
      for (std::size_t k = 0; k < len; ++k) {
        Complex s = 0.0;
        for (std::size_t t = 0; t < len; ++t) s += in[t * stride] * twiddle_[((k * t) % len) * step];
        out[k] = s;
      }
      return;
    }
    const std::size_t m = len / p;
    for (std::size_t r = 0; r < p; ++r) run(in + r * stride, stride * p, m, out + r * m);
    std::vector<Complex> tmp(len);
    for (std::size_t q = 0; q < p; ++q)
      for (std::size_t k = 0; k < m; ++k) {
        const std::size_t kk = k + q * m;
        Complex s = 0.0;
        for (std::size_t r = 0; r < p; ++r) s += out[r * m + k] * twiddle_[((r * kk) % len) * step];
        tmp[kk] = s;
      }
    std::copy(tmp.begin(), tmp.end(), out);
  }

 private:
  std::size_t n_;
  std::vector<Complex> twiddle_;
};

}  // namespace

std::vector<Complex> fft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("fft: empty input");
  std::vector<Complex> in(x.begin(), x.end());
  std::vector<Complex> out(n);
  MixedRadix(n).run(in.data(), 1, n, out.data());
  return out;
}

RealSpectrum rfft_amplitudes(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw ShapeError("rfft_amplitudes: need at least 2 samples, got " + std::to_string(n));
  auto full = fft(x);
  RealSpectrum out;
  out.spectrum.source_length = n;
  out.spectrum.bins.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(spectrum_bins(n)));
  // DC and (even-length) Nyquist bins are real for real input.
  out.spectrum.bins.front().imag(0.0);
  if (n % 2 == 0) out.spectrum.bins.back().imag(0.0);
  out.amplitudes.reserve(out.spectrum.bins.size());
  for (const auto& b : out.spectrum.bins) out.amplitudes.push_back(std::hypot(b.real(), b.imag()));
  return out;
}

Tensor amplitude_matrix(const Tensor& sequences) {
  require_matrix(sequences, "amplitude_matrix");
  const std::size_t f = spectrum_bins(sequences.cols());
  Tensor out({sequences.rows(), f});
  for (std::size_t i = 0; i < sequences.rows(); ++i) {
    auto amps = rfft_amplitudes(sequences.row(i)).amplitudes;
    std::copy(amps.begin(), amps.end(), out.row(i).begin());
  }
  return out;
}

MssWeights MssWeights::ones(std::size_t heads, std::size_t tokens, std::size_t bins) {
  return MssWeights(Tensor({heads, tokens, bins}, 1.0));
}

MssWeights::MssWeights(Tensor weights) : weights_(std::move(weights)) {
  if (weights_.rank() != 3) {
    throw ShapeError("MssWeights: expected {H, tokens, F}, got " + shape_to_string(weights_.shape()));
  }
}

Tensor MssWeights::head(std::size_t h) const {
  if (h >= heads()) throw ShapeError("MssWeights: head index out of range");
  const std::size_t block = tokens() * bins();
  std::vector<double> data(weights_.storage().begin() + static_cast<std::ptrdiff_t>(h * block),
                           weights_.storage().begin() + static_cast<std::ptrdiff_t>((h + 1) * block));
  return Tensor({tokens(), bins()}, std::move(data));
}

Tensor mss_project(const Tensor& amplitudes, const MssWeights& weights, std::size_t head) {
  Tensor w = weights.head(head);
  require_same_shape(amplitudes, w, "mss_project");
  Tensor out = amplitudes;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= w[i];
  return out;
}

Var mss_project(Var amplitudes, Var head_weights) {
  require_same_shape(amplitudes.value(), head_weights.value(), "mss_project");
  return hadamard(amplitudes, head_weights);
}

}  // namespace sattn
