#include "sattn/optim.hpp"

#include <cmath>

#include "sattn/errors.hpp"

namespace sattn {

Adam::Adam(AdamOptions options) : options_(options) {
  if (!(options_.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (options_.beta1 < 0.0 || options_.beta1 >= 1.0 || options_.beta2 < 0.0 || options_.beta2 >= 1.0) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (!(options_.eps > 0.0)) throw ConfigError("adam: eps must be positive");
}

void Adam::step(std::span<Parameter* const> params, std::size_t t) {
  if (t < 1) throw ConfigError("adam: step index must be >= 1");
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("adam: parameter list changed between steps");

  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p]->value.storage();
    const auto& g = params[p]->grad.storage();
    auto& m = m_[p].storage();
    auto& v = v_[p].storage();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

}  // namespace sattn
