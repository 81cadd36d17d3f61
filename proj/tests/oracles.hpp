#pragma once

// Deliberately naive reference implementations used only by tests. None of
// them shares code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "sattn/tensor.hpp"

namespace oracle {

using sattn::Tensor;

inline Tensor random_tensor(sattn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

/// Amplitudes |X_k| for k = 0..floor(L/2) in extended precision.
inline std::vector<double> dft_amplitudes(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t t = 0; t < n; ++t) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>((k * t) % n) / n;
      re += x[t] * std::cos(ang);
      im += x[t] * std::sin(ang);
    }
    out.push_back(static_cast<double>(std::sqrt(re * re + im * im)));
  }
  return out;
}

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(Tensor a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-300) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

/// Singular values via eigenvalues of A^T A.
inline std::vector<double> singular_values(const Tensor& a) {
  Tensor ata({a.cols(), a.cols()});
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < a.rows(); ++k) s += static_cast<long double>(a(k, i)) * a(k, j);
      ata(i, j) = static_cast<double>(s);
    }
  auto ev = jacobi_eigenvalues(ata);
  for (auto& v : ev) v = std::sqrt(std::max(v, 0.0));
  return ev;
}

/// x {Cin, H, W}, k {Cout, Cin, K, K}, zero padding K/2, stride 1.
inline Tensor conv2d_same(const Tensor& x, const Tensor& k) {
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2), cout = k.dim(0), ks = k.dim(2);
  const long pad = static_cast<long>(ks / 2);
  Tensor y({cout, h, w});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t a = 0; a < ks; ++a)
            for (std::size_t b = 0; b < ks; ++b) {
              const long ii = static_cast<long>(i) + static_cast<long>(a) - pad;
              const long jj = static_cast<long>(j) + static_cast<long>(b) - pad;
              if (ii < 0 || jj < 0 || ii >= static_cast<long>(h) || jj >= static_cast<long>(w)) continue;
              s += x(c, static_cast<std::size_t>(ii), static_cast<std::size_t>(jj)) *
                   k[((o * cin + c) * ks + a) * ks + b];
            }
        y(o, i, j) = s;
      }
  return y;
}

/// Per-head softmax(q k^T / scale) and its product with v; all {H, N, d}.
inline std::pair<Tensor, Tensor> attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale) {
  const std::size_t heads = q.dim(0), n = q.dim(1), d = q.dim(2), dv = v.dim(2);
  Tensor weights({heads, n, n}), out({heads, n, dv});
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(n);
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += q(h, i, c) * k(h, j, c);
        s[j] = dot / scale;
      }
      const double m = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (auto& e : s) z += (e = std::exp(e - m));
      for (std::size_t j = 0; j < n; ++j) weights(h, i, j) = s[j] / z;
      for (std::size_t c = 0; c < dv; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += weights(h, i, j) * v(h, j, c);
        out(h, i, c) = acc;
      }
    }
  return {weights, out};
}

/// Central-difference gradient of a scalar function of a tensor.
inline Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, Tensor x, double step = 1e-6) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace oracle
