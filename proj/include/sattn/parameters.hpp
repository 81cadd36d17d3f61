#pragma once

#include <deque>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sattn/autodiff.hpp"
#include "sattn/rng.hpp"

namespace sattn {

/// Owns named parameters with stable addresses, in creation order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  /// Throws std::invalid_argument on duplicate names.
  Parameter& add(std::string name, Tensor value);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  Parameter& at(std::string_view name);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  /// Total number of scalar entries.
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::deque<Parameter> params_;
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) entries.
Tensor uniform_fan_in(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

/// y = x W + b with W: in x out, b: {out}. Bias starts at zero.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         const SeedSequence& seeds);

  Var forward(Tape& tape, Var x) const;
  Parameter& weight() const { return *weight_; }
  Parameter& bias() const { return *bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

}  // namespace sattn
