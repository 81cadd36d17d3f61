#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sattn/autodiff.hpp"

namespace sattn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are created lazily, one pair per
/// parameter, and keyed by position in the list passed to `step`, so the same
/// list must be passed on every call.
class Adam {
 public:
  explicit Adam(AdamOptions options);

  /// Applies one update at step index `t` (1-based).
  void step(std::span<Parameter* const> params, std::size_t t);

  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace sattn
