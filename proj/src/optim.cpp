#include "wait/optim.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "wait/common.hpp"

namespace wait::optim {

Adam::Adam(std::vector<Var> params, AdamConfig cfg) : cfg_(cfg), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.defined() || !p.requires_grad())
      throw ConfigError("Adam: every parameter must be a grad-enabled leaf");
    m_.emplace_back(p.value().shape());
    v_.emplace_back(p.value().shape());
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    Tensor& val = p.value();
    const double* gp = p.has_grad() ? p.grad().data() : nullptr;
    double* mp = m_[i].data();
    double* vp = v_[i].data();
    double* x = val.data();
    for (std::int64_t k = 0; k < val.numel(); ++k) {
      const double gk = gp ? gp[k] : 0.0;
      mp[k] = cfg_.beta1 * mp[k] + (1.0 - cfg_.beta1) * gk;
      vp[k] = cfg_.beta2 * vp[k] + (1.0 - cfg_.beta2) * gk * gk;
      const double mhat = mp[k] / bc1;
      const double vhat = vp[k] / bc2;
      x[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double lr_schedule(int epoch, int total_epochs, double base_lr) {
  if (total_epochs < 1) throw ConfigError("lr_schedule: total_epochs must be >= 1");
  if (epoch < 0 || epoch > total_epochs)
    throw ConfigError("lr_schedule: epoch outside [0, total_epochs]");
  const int half = total_epochs / 2;
  if (epoch < half) return base_lr;
  return base_lr * static_cast<double>(total_epochs - epoch) /
         static_cast<double>(total_epochs - half);
}

Tensor ImagePool::query(const Tensor& image, Rng& rng) {
  if (capacity_ <= 0) return image;
  if (static_cast<int>(buffer_.size()) < capacity_) {
    buffer_.push_back(image);
    return image;
  }
  if (rng.uniform() < 0.5) return image;
  const auto j = static_cast<std::size_t>(rng.uniform_int(0, capacity_ - 1));
  Tensor out = buffer_[j];
  buffer_[j] = image;
  return out;
}

Tensor ImagePool::query_batch(const Tensor& batch, Rng& rng) {
  if (batch.rank() != 4) throw ShapeError("ImagePool: expected (N,C,H,W)");
  const int n = batch.dim(0);
  const std::int64_t item = batch.numel() / n;
  Tensor out(batch.shape());
  std::vector<int> item_shape{batch.dim(1), batch.dim(2), batch.dim(3)};
  for (int i = 0; i < n; ++i) {
    Tensor img(item_shape);
    std::copy_n(batch.data() + i * item, item, img.data());
    Tensor got = query(img, rng);
    std::copy_n(got.data(), item, out.data() + i * item);
  }
  return out;
}

}  // namespace wait::optim
