#pragma once

// Central finite-difference gradient checker. Shared by the unit tests and
// the acceptance harness, so it must not depend on any test framework.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "wait/autograd.hpp"
#include "wait/rng.hpp"

namespace testing_util {

struct GradCheckResult {
  double max_rel = 0.0;
  std::int64_t checked = 0;
};

// fn must rebuild the graph from the leaf inputs on every call and return a
// scalar. Relative error uses max(|fd|, |analytic|, 1e-6) in the denominator
// so near-zero gradients are compared absolutely.
inline GradCheckResult grad_check(const std::function<wait::Var(std::vector<wait::Var>&)>& fn,
                                  std::vector<wait::Var>& inputs, double h = 1e-5) {
  using wait::Tensor;
  using wait::Var;
  for (auto& in : inputs) in.zero_grad();
  Var loss = fn(inputs);
  if (loss.value().numel() != 1) throw std::logic_error("grad_check: loss must be scalar");
  wait::backward(loss);

  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs)
    analytic.push_back(in.has_grad() ? in.grad() : Tensor::zeros(in.value().shape()));

  GradCheckResult r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& val = inputs[k].value();
    for (std::int64_t i = 0; i < val.numel(); ++i) {
      const double orig = val[i];
      val[i] = orig + h;
      const double fp = fn(inputs).value()[0];
      val[i] = orig - h;
      const double fm = fn(inputs).value()[0];
      val[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[k][i];
      const double rel =
          std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-6});
      r.max_rel = std::max(r.max_rel, rel);
      ++r.checked;
    }
  }
  return r;
}

// Same contract as grad_check but only probes `samples` randomly chosen
// coordinates per input; used for networks where exhaustive FD is too slow.
inline GradCheckResult spot_grad_check(
    const std::function<wait::Var(std::vector<wait::Var>&)>& fn, std::vector<wait::Var>& inputs,
    wait::Rng& rng, int samples, double h = 1e-5) {
  using wait::Tensor;
  using wait::Var;
  for (auto& in : inputs) in.zero_grad();
  Var loss = fn(inputs);
  if (loss.value().numel() != 1) throw std::logic_error("spot_grad_check: loss must be scalar");
  wait::backward(loss);

  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs)
    analytic.push_back(in.has_grad() ? in.grad() : Tensor::zeros(in.value().shape()));

  GradCheckResult r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& val = inputs[k].value();
    for (int s = 0; s < samples; ++s) {
      const std::int64_t i = rng.uniform_int(0, val.numel() - 1);
      const double orig = val[i];
      val[i] = orig + h;
      const double fp = fn(inputs).value()[0];
      val[i] = orig - h;
      const double fm = fn(inputs).value()[0];
      val[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[k][i];
      const double rel =
          std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-6});
      r.max_rel = std::max(r.max_rel, rel);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace testing_util
