#ifndef RQL_OPTIM_HPP
#define RQL_OPTIM_HPP

#include <cmath>
#include <string>

#include "rql/network.hpp"
#include "rql/tensor.hpp"

namespace rql {

enum class ClipMode { kNorm, kElement };

template <typename T>
double global_l2_norm(const ParameterSet<T>& grads) {
  double sq = 0.0;
  for (const auto& e : grads.entries) {
    const T* v = e.tensor.data();
    const size_t n = e.tensor.size();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      s0 += static_cast<double>(v[i]) * v[i];
      s1 += static_cast<double>(v[i + 1]) * v[i + 1];
      s2 += static_cast<double>(v[i + 2]) * v[i + 2];
      s3 += static_cast<double>(v[i + 3]) * v[i + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) s += static_cast<double>(v[i]) * v[i];
    sq += s;
  }
  return std::sqrt(sq);
}

// kNorm rescales the joint gradient so its global L2 norm is at most
// `threshold`; kElement clamps each component to [-threshold, threshold].
// Returns the pre-clip global norm. Idempotent.
template <typename T>
double clip_gradients(ParameterSet<T>& grads, double threshold,
                      ClipMode mode = ClipMode::kNorm) {
  if (threshold <= 0) {
    throw ConfigError("clip threshold must be positive, got " +
                      std::to_string(threshold));
  }
  const double norm = global_l2_norm(grads);
  if (mode == ClipMode::kNorm) {
    if (norm > threshold) {
      const T scale = static_cast<T>(threshold / norm);
      for (auto& e : grads.entries) {
        for (size_t i = 0; i < e.tensor.size(); ++i) e.tensor[i] *= scale;
      }
    }
  } else {
    const T t = static_cast<T>(threshold);
    for (auto& e : grads.entries) {
      for (size_t i = 0; i < e.tensor.size(); ++i) {
        if (e.tensor[i] > t) e.tensor[i] = t;
        if (e.tensor[i] < -t) e.tensor[i] = -t;
      }
    }
  }
  return norm;
}

// ADADELTA with a global step scale. Per parameter:
//   avg_sq_grad   <- rho * avg_sq_grad + (1 - rho) * g^2
//   delta          = -lr * sqrt(avg_sq_update + eps) / sqrt(avg_sq_grad + eps) * g
//   avg_sq_update <- rho * avg_sq_update + (1 - rho) * delta^2
//   param        += delta
template <typename T>
class AdaDelta {
 public:
  AdaDelta(double lr, double rho, double eps)
      : lr_(static_cast<T>(lr)), rho_(static_cast<T>(rho)),
        eps_(static_cast<T>(eps)) {
    if (!(rho > 0.0 && rho < 1.0)) {
      throw ConfigError("adadelta rho must be in (0,1), got " + std::to_string(rho));
    }
    if (lr <= 0.0 || eps <= 0.0) {
      throw ConfigError("adadelta lr and eps must be positive");
    }
  }

  // Accumulators start at zero and mirror the parameter layout.
  void init(const ParameterSet<T>& params) {
    avg_sq_grad_ = params;
    avg_sq_grad_.zero_all();
    avg_sq_grad_.version = 0;
    avg_sq_update_ = avg_sq_grad_;
  }

  bool initialized() const { return !avg_sq_grad_.entries.empty(); }

  void step(ParameterSet<T>& params, const ParameterSet<T>& grads) {
    if (!initialized()) init(params);
    if (params.entries.size() != grads.entries.size() ||
        params.entries.size() != avg_sq_grad_.entries.size()) {
      throw ShapeError("optimizer entry count mismatch");
    }
    for (size_t e = 0; e < params.entries.size(); ++e) {
      Tensor<T>& p = params.entries[e].tensor;
      const Tensor<T>& g = grads.entries[e].tensor;
      Tensor<T>& eg2 = avg_sq_grad_.entries[e].tensor;
      Tensor<T>& ed2 = avg_sq_update_.entries[e].tensor;
      if (!p.same_shape(g)) {
        throw ShapeError("gradient for " + params.entries[e].name + " has shape " +
                         g.shape_string() + ", parameter has " + p.shape_string());
      }
      // branch-free elementwise loop so it vectorizes; finiteness is
      // validated per entry afterwards
      T* pp = p.data();
      const T* gp = g.data();
      T* g2 = eg2.data();
      T* d2 = ed2.data();
      const T one_minus_rho = T(1) - rho_;
      for (size_t i = 0; i < p.size(); ++i) {
        const T gv = gp[i];
        g2[i] = rho_ * g2[i] + one_minus_rho * gv * gv;
        const T delta = -lr_ * std::sqrt(d2[i] + eps_) /
                        std::sqrt(g2[i] + eps_) * gv;
        d2[i] = rho_ * d2[i] + one_minus_rho * delta * delta;
        pp[i] += delta;
      }
      if (!p.all_finite()) {
        throw NumericalError("non-finite parameter after optimizer step in " +
                             params.entries[e].name);
      }
    }
    params.version += 1;
  }

  T lr() const { return lr_; }
  T rho() const { return rho_; }
  T eps() const { return eps_; }

  // Exposed so checkpoints can persist optimizer state and training resumes
  // bit-exactly.
  const ParameterSet<T>& avg_sq_grad() const { return avg_sq_grad_; }
  const ParameterSet<T>& avg_sq_update() const { return avg_sq_update_; }
  void restore(ParameterSet<T> avg_sq_grad, ParameterSet<T> avg_sq_update) {
    avg_sq_grad_ = std::move(avg_sq_grad);
    avg_sq_update_ = std::move(avg_sq_update);
  }

 private:
  T lr_, rho_, eps_;
  ParameterSet<T> avg_sq_grad_;
  ParameterSet<T> avg_sq_update_;
};

}  // namespace rql

#endif  // RQL_OPTIM_HPP
