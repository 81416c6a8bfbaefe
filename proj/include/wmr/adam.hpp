#pragma once

#include <cmath>

#include <Eigen/Core>

namespace wmr {

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int iters = 300;
};

struct AdamMoments {
  Eigen::VectorXd first;
  Eigen::VectorXd second;

  static AdamMoments zeros(Eigen::Index n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  }
};

/// One bias-corrected Adam step; `step` is 1-based.
inline void adam_update(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                        AdamMoments& moments, int step, const AdamConfig& cfg) {
  moments.first = cfg.beta1 * moments.first + (1.0 - cfg.beta1) * grad;
  moments.second = cfg.beta2 * moments.second + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, step);
  const double c2 = 1.0 - std::pow(cfg.beta2, step);
  params.array() -= cfg.lr * (moments.first.array() / c1) /
                    ((moments.second.array() / c2).sqrt() + cfg.eps);
}

}  // namespace wmr
