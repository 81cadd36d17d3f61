#include "sattn/ops.hpp"

#include <cmath>
#include <numbers>

#include "sattn/errors.hpp"

namespace sattn {

namespace {

bool needs(const Tape& t, std::size_t id) { return t.requires_grad(id); }

bool any_needs(std::initializer_list<Var> vars) {
  for (const auto& v : vars)
    if (v.tape().requires_grad(v.id())) return true;
  return false;
}

void same_tape(Var a, Var b, const char* what) {
  if (&a.tape() != &b.tape()) throw std::logic_error(std::string(what) + ": operands on different tapes");
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto& d = dst.storage();
  const auto& s = src.storage();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Records `value`; the closure is dropped when no operand requires a gradient.
Var emit(Tape& t, Tensor value, bool differentiable, Tape::BackwardFn fn) {
  return t.record(std::move(value), differentiable ? std::move(fn) : Tape::BackwardFn{});
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  Tape& t = a.tape();
  Tensor out = matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return emit(t, std::move(out), any_needs({a, b}), [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& av = tp.value(ia);
    const Tensor& bv = tp.value(ib);
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (needs(tp, ia)) {
      Tensor& ga = tp.grad(ia);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t r = 0; r < k; ++r) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g(i, j) * bv(r, j);
          ga(i, r) += s;
        }
    }
    if (needs(tp, ib)) {
      Tensor& gb = tp.grad(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t r = 0; r < k; ++r) {
          const double av_ir = av(i, r);
          if (av_ir == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb(r, j) += av_ir * g(i, j);
        }
    }
  });
}

Var transpose(Var a) {
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  return emit(t, transpose(a.value()), any_needs({a}), [ia](Tape& tp, std::size_t self) {
    accumulate(tp.grad(ia), transpose(tp.grad(self)));
  });
}

Var add(Var a, Var b) {
  same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  accumulate(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return emit(a.tape(), std::move(out), any_needs({a, b}), [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (needs(tp, ia)) accumulate(tp.grad(ia), g);
    if (needs(tp, ib)) accumulate(tp.grad(ib), g);
  });
}

Var sub(Var a, Var b) {
  same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return emit(a.tape(), std::move(out), any_needs({a, b}), [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (needs(tp, ia)) accumulate(tp.grad(ia), g);
    if (needs(tp, ib)) {
      Tensor& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var hadamard(Var a, Var b) {
  same_tape(a, b, "hadamard");
  require_same_shape(a.value(), b.value(), "hadamard");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return emit(a.tape(), std::move(out), any_needs({a, b}), [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (needs(tp, ia)) {
      Tensor& ga = tp.grad(ia);
      const Tensor& bv = tp.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (needs(tp, ib)) {
      Tensor& gb = tp.grad(ib);
      const Tensor& av = tp.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= s;
  const std::size_t ia = a.id();
  return emit(a.tape(), std::move(out), any_needs({a}), [ia, s](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var add_row_bias(Var x, Var b) {
  same_tape(x, b, "add_row_bias");
  require_matrix(x.value(), "add_row_bias");
  const std::size_t n = x.value().rows(), m = x.value().cols();
  if (b.value().size() != m) {
    throw ShapeError("add_row_bias: bias " + shape_to_string(b.shape()) + " vs input " +
                     shape_to_string(x.shape()));
  }
  Tensor out = x.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) += b.value()[j];
  const std::size_t ix = x.id(), ibias = b.id();
  return emit(x.tape(), std::move(out), any_needs({x, b}),
              [ix, ibias, n, m](Tape& tp, std::size_t self) {
                const Tensor& g = tp.grad(self);
                if (needs(tp, ix)) accumulate(tp.grad(ix), g);
                if (needs(tp, ibias)) {
                  Tensor& gb = tp.grad(ibias);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) gb[j] += g(i, j);
                }
              });
}

Var softmax_rows(Var scores) {
  Tensor out = softmax_rows(scores.value());
  const std::size_t is = scores.id();
  return emit(scores.tape(), std::move(out), any_needs({scores}), [is](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor& gs = tp.grad(is);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gs(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.storage()) v = v > 0.0 ? v : 0.0;
  const std::size_t ix = x.id();
  return emit(x.tape(), std::move(out), any_needs({x}), [ix](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& in = tp.value(ix);
    Tensor& gx = tp.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in[i] > 0.0) gx[i] += g[i];
  });
}

Var gelu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.storage()) v = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  const std::size_t ix = x.id();
  return emit(x.tape(), std::move(out), any_needs({x}), [ix](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& in = tp.value(ix);
    Tensor& gx = tp.grad(ix);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = in[i];
      const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  same_tape(x, gamma, "layer_norm_rows");
  same_tape(x, beta, "layer_norm_rows");
  require_matrix(x.value(), "layer_norm_rows");
  const std::size_t n = x.value().rows(), m = x.value().cols();
  if (gamma.value().size() != m || beta.value().size() != m) {
    throw ShapeError("layer_norm_rows: affine parameters must have " + std::to_string(m) + " entries");
  }
  Tensor xhat({n, m});
  std::vector<double> inv_std(n);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean += x.value()(i, j);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = x.value()(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      xhat(i, j) = (x.value()(i, j) - mean) * inv_std[i];
      out(i, j) = xhat(i, j) * gamma.value()[j] + beta.value()[j];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return emit(x.tape(), std::move(out), any_needs({x, gamma, beta}),
              [ix, ig, ib, n, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  Tape& tp, std::size_t self) {
                const Tensor& g = tp.grad(self);
                const Tensor& gam = tp.value(ig);
                if (needs(tp, ig)) {
                  Tensor& gg = tp.grad(ig);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) gg[j] += g(i, j) * xhat(i, j);
                }
                if (needs(tp, ib)) {
                  Tensor& gb = tp.grad(ib);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) gb[j] += g(i, j);
                }
                if (needs(tp, ix)) {
                  Tensor& gx = tp.grad(ix);
                  const double inv_m = 1.0 / static_cast<double>(m);
                  for (std::size_t i = 0; i < n; ++i) {
                    double mean_g = 0.0, mean_gx = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                      const double gh = g(i, j) * gam[j];
                      mean_g += gh;
                      mean_gx += gh * xhat(i, j);
                    }
                    mean_g *= inv_m;
                    mean_gx *= inv_m;
                    for (std::size_t j = 0; j < m; ++j) {
                      const double gh = g(i, j) * gam[j];
                      gx(i, j) += inv_std[i] * (gh - mean_g - xhat(i, j) * mean_gx);
                    }
                  }
                }
              });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  require_matrix(x.value(), "slice_cols");
  const std::size_t n = x.value().rows(), m = x.value().cols();
  if (count == 0 || start + count > m) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " + shape_to_string(x.shape()));
  }
  Tensor out({n, count});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x.value()(i, start + j);
  const std::size_t ix = x.id();
  return emit(x.tape(), std::move(out), any_needs({x}), [ix, start, n, count](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(ix);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < count; ++j) gx(i, start + j) += g(i, j);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = parts.front().tape();
  const std::size_t n = parts.front().value().rows();
  std::size_t total = 0;
  bool differentiable = false;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "concat_cols");
    require_matrix(p.value(), "concat_cols");
    if (p.value().rows() != n) throw ShapeError("concat_cols: row counts differ");
    total += p.value().cols();
    differentiable = differentiable || t.requires_grad(p.id());
  }
  Tensor out({n, total});
  std::vector<std::size_t> ids;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, off + j) = v(i, j);
    off += v.cols();
    ids.push_back(p.id());
  }
  return emit(t, std::move(out), differentiable, [ids = std::move(ids), n](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    std::size_t o = 0;
    for (auto id : ids) {
      const std::size_t c = tp.value(id).cols();
      if (needs(tp, id)) {
        Tensor& gp = tp.grad(id);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) gp(i, j) += g(i, o + j);
      }
      o += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Tape& t = parts.front().tape();
  const std::size_t m = parts.front().value().cols();
  std::size_t total = 0;
  bool differentiable = false;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "concat_rows");
    require_matrix(p.value(), "concat_rows");
    if (p.value().cols() != m) throw ShapeError("concat_rows: column counts differ");
    total += p.value().rows();
    differentiable = differentiable || t.requires_grad(p.id());
  }
  std::vector<double> data;
  data.reserve(total * m);
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    data.insert(data.end(), p.value().storage().begin(), p.value().storage().end());
    ids.push_back(p.id());
  }
  return emit(t, Tensor({total, m}, std::move(data)), differentiable,
              [ids = std::move(ids)](Tape& tp, std::size_t self) {
                const Tensor& g = tp.grad(self);
                std::size_t o = 0;
                for (auto id : ids) {
                  const std::size_t sz = tp.value(id).size();
                  if (needs(tp, id)) {
                    Tensor& gp = tp.grad(id);
                    for (std::size_t k = 0; k < sz; ++k) gp[k] += g[o + k];
                  }
                  o += sz;
                }
              });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.id();
  return emit(x.tape(), std::move(out), any_needs({x}), [ix](Tape& tp, std::size_t self) {
    auto& gx = tp.grad(ix).storage();
    const auto& g = tp.grad(self).storage();
    for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k];
  });
}

Var stack(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("stack: no operands");
  Tape& t = parts.front().tape();
  const Shape inner = parts.front().shape();
  bool differentiable = false;
  std::vector<double> data;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "stack");
    if (p.shape() != inner) throw ShapeError("stack: operand shapes differ");
    data.insert(data.end(), p.value().storage().begin(), p.value().storage().end());
    ids.push_back(p.id());
    differentiable = differentiable || t.requires_grad(p.id());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  const std::size_t block = shape_size(inner);
  return emit(t, Tensor(std::move(shape), std::move(data)), differentiable,
              [ids = std::move(ids), block](Tape& tp, std::size_t self) {
                const Tensor& g = tp.grad(self);
                for (std::size_t h = 0; h < ids.size(); ++h) {
                  if (!needs(tp, ids[h])) continue;
                  Tensor& gp = tp.grad(ids[h]);
                  for (std::size_t k = 0; k < block; ++k) gp[k] += g[h * block + k];
                }
              });
}

Var select(Var x, std::size_t index) {
  const Shape& s = x.shape();
  if (index >= s[0]) throw ShapeError("select: index out of range for " + shape_to_string(s));
  Shape inner(s.begin() + 1, s.end());
  if (inner.empty()) inner = {1};
  const std::size_t block = shape_size(inner);
  std::vector<double> data(x.value().storage().begin() + static_cast<std::ptrdiff_t>(index * block),
                           x.value().storage().begin() + static_cast<std::ptrdiff_t>((index + 1) * block));
  const std::size_t ix = x.id();
  return emit(x.tape(), Tensor(std::move(inner), std::move(data)), any_needs({x}),
              [ix, index, block](Tape& tp, std::size_t self) {
                const Tensor& g = tp.grad(self);
                Tensor& gx = tp.grad(ix);
                for (std::size_t k = 0; k < block; ++k) gx[index * block + k] += g[k];
              });
}

namespace {

void check_conv_shapes(const Tensor& x, const Tensor& kernel) {
  if (x.rank() != 3 || kernel.rank() != 4) {
    throw ShapeError("conv2d_same: expected input {C,H,W} and kernel {Cout,Cin,K,K}, got " +
                     shape_to_string(x.shape()) + " and " + shape_to_string(kernel.shape()));
  }
  if (kernel.dim(1) != x.dim(0)) throw ShapeError("conv2d_same: input channel mismatch");
  if (kernel.dim(2) != kernel.dim(3)) throw ShapeError("conv2d_same: kernel must be square");
  if (kernel.dim(2) % 2 == 0) throw ConfigError("conv2d_same: kernel size must be odd");
}

}  // namespace

Tensor conv2d_same(const Tensor& x, const Tensor& kernel) {
  check_conv_shapes(x, kernel);
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = kernel.dim(0), k = kernel.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  Tensor out({cout, h, w});
  const double* kd = kernel.data().data();
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xo = 0; xo < w; ++xo) {
        double s = 0.0;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(y + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(xo + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              s += kd[((co * cin + ci) * k + ky) * k + kx] *
                   x(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        out(co, y, xo) = s;
      }
  return out;
}

Var conv2d_same(Var x, Var kernel) {
  same_tape(x, kernel, "conv2d_same");
  Tensor out = conv2d_same(x.value(), kernel.value());
  const std::size_t ix = x.id(), ik = kernel.id();
  return emit(x.tape(), std::move(out), any_needs({x, kernel}), [ix, ik](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& in = tp.value(ix);
    const Tensor& ker = tp.value(ik);
    const std::size_t cin = in.dim(0), h = in.dim(1), w = in.dim(2);
    const std::size_t cout = ker.dim(0), k = ker.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const bool want_x = needs(tp, ix), want_k = needs(tp, ik);
    Tensor* gx = want_x ? &tp.grad(ix) : nullptr;
    Tensor* gk = want_k ? &tp.grad(ik) : nullptr;
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xo = 0; xo < w; ++xo) {
          const double go = g(co, y, xo);
          if (go == 0.0) continue;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(y + ky) - pad;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const auto jx = static_cast<std::ptrdiff_t>(xo + kx) - pad;
                if (jx < 0 || jx >= static_cast<std::ptrdiff_t>(w)) continue;
                const auto uy = static_cast<std::size_t>(iy), ux = static_cast<std::size_t>(jx);
                const std::size_t kidx = ((co * cin + ci) * k + ky) * k + kx;
                if (gx) (*gx)(ci, uy, ux) += ker[kidx] * go;
                if (gk) (*gk)[kidx] += in(ci, uy, ux) * go;
              }
            }
        }
  });
}

Var apply_mask(Var x, const Tensor& mask) {
  require_same_shape(x.value(), mask, "apply_mask");
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t ix = x.id();
  return emit(x.tape(), std::move(out), any_needs({x}), [ix, mask](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().storage()) s += v;
  const std::size_t ix = x.id();
  return emit(x.tape(), Tensor::scalar(s), any_needs({x}), [ix](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (auto& v : tp.grad(ix).storage()) v += g;
  });
}

Var mse_loss(Var pred, Var target) {
  same_tape(pred, target, "mse_loss");
  require_same_shape(pred.value(), target.value(), "mse_loss");
  const std::size_t n = pred.value().size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred.value()[i] - target.value()[i];
    s += d * d;
  }
  const std::size_t ip = pred.id(), it = target.id();
  return emit(pred.tape(), Tensor::scalar(s / static_cast<double>(n)), any_needs({pred, target}),
              [ip, it, n](Tape& tp, std::size_t self) {
                const double g = tp.grad(self)[0] * 2.0 / static_cast<double>(n);
                const Tensor& p = tp.value(ip);
                const Tensor& t = tp.value(it);
                if (needs(tp, ip)) {
                  Tensor& gp = tp.grad(ip);
                  for (std::size_t i = 0; i < n; ++i) gp[i] += g * (p[i] - t[i]);
                }
                if (needs(tp, it)) {
                  Tensor& gt = tp.grad(it);
                  for (std::size_t i = 0; i < n; ++i) gt[i] -= g * (p[i] - t[i]);
                }
              });
}

}  // namespace sattn
