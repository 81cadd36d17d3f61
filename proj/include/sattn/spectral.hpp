#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "sattn/autodiff.hpp"
#include "sattn/tensor.hpp"

namespace sattn {

using Complex = std::complex<double>;

/// Number of one-sided bins for a real sequence of length L: floor(L/2) + 1.
constexpr std::size_t spectrum_bins(std::size_t length) { return length / 2 + 1; }

/// One-sided DFT of a real sequence.
struct Spectrum {
  std::vector<Complex> bins;  // spectrum_bins(source_length) entries
  std::size_t source_length = 0;

  std::size_t bin_count() const { return bins.size(); }
};

struct RealSpectrum {
  Spectrum spectrum;
  std::vector<double> amplitudes;  // |X_k|, one per bin
};

/// Full DFT by the direct double sum X[k] = sum_t x[t] e^{-i 2 pi k t / L}.
std::vector<Complex> dft_naive(std::span<const double> x);

/// Full DFT by recursive mixed-radix Cooley-Tukey. Prime-length stages fall
/// back to the direct sum, so every L >= 1 is supported.
std::vector<Complex> fft(std::span<const double> x);

/// First floor(L/2)+1 bins of the DFT and their magnitudes. Requires L >= 2.
RealSpectrum rfft_amplitudes(std::span<const double> x);

/// Amplitude rows for each row of `sequences` (tokens x L) -> tokens x F.
Tensor amplitude_matrix(const Tensor& sequences);

/// Per-head elementwise scales for amplitude (or embedding) rows.
class MssWeights {
 public:
  /// All-ones scaling: the untrained projection is the identity.
  static MssWeights ones(std::size_t heads, std::size_t tokens, std::size_t bins);
  explicit MssWeights(Tensor weights);

  std::size_t heads() const { return weights_.dim(0); }
  std::size_t tokens() const { return weights_.dim(1); }
  std::size_t bins() const { return weights_.dim(2); }
  Tensor head(std::size_t h) const;
  const Tensor& tensor() const { return weights_; }

 private:
  Tensor weights_;  // {H, tokens, F}
};

/// output[i][k] = A[i][k] * W_head[i][k].
Tensor mss_project(const Tensor& amplitudes, const MssWeights& weights, std::size_t head);
/// Recorded variant; `head_weights` is tokens x F.
Var mss_project(Var amplitudes, Var head_weights);

}  // namespace sattn
