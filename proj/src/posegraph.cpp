#include "georef/posegraph.hpp"

#include "georef/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace georef {

namespace {

constexpr double kJacobianStep = 1e-6;

struct Term {
  Vec6 residual;
  Eigen::Matrix<double, 6, 6> jacobian;
  double weight;
};

class FrameProblem {
 public:
  FrameProblem(const std::optional<AbsoluteConstraint>& abs,
               const std::optional<RelativeConstraint>& rel, double rotation_scale)
      : abs_(abs), rel_(rel), rotation_scale_(rotation_scale) {}

  Vec6 abs_residual(const Pose& x) const { return scaled(absolute_residual(x, abs_->measured)); }
  Vec6 rel_residual(const Pose& x) const {
    return scaled(relative_residual(rel_->anchor, x, rel_->measured_delta));
  }

  double cost(const Pose& x) const {
    double c = 0.0;
    if (abs_) c += abs_->scale * tukey_loss(abs_residual(x).squaredNorm(), abs_->width);
    if (rel_) c += rel_->scale * cauchy_loss(rel_residual(x).squaredNorm(), rel_->width);
    return 0.5 * c;
  }

  double abs_weight(const Pose& x) const {
    return abs_ ? tukey_loss_derivative(abs_residual(x).squaredNorm(), abs_->width) : 0.0;
  }
  double rel_weight(const Pose& x) const {
    return rel_ ? cauchy_loss_derivative(rel_residual(x).squaredNorm(), rel_->width) : 0.0;
  }

  /// IRLS normal equations around x under the left perturbation exp(δ) ∘ x.
  void linearize(const Pose& x, Mat6& h, Vec6& g) const {
    h.setZero();
    g.setZero();
    if (abs_) {
      accumulate([this](const Pose& p) { return abs_residual(p); }, x,
                 abs_->scale * abs_weight(x), h, g);
    }
    if (rel_) {
      accumulate([this](const Pose& p) { return rel_residual(p); }, x,
                 rel_->scale * rel_weight(x), h, g);
    }
  }

 private:
  Vec6 scaled(Vec6 r) const {
    r.tail<3>() *= rotation_scale_;
    return r;
  }

  template <class F>
  static void accumulate(F&& f, const Pose& x, double w, Mat6& h, Vec6& g) {
    if (w <= 0.0) return;
    const Vec6 r = f(x);
    Mat6 j;
    for (int k = 0; k < 6; ++k) {
      Vec6 d = Vec6::Zero();
      d(k) = kJacobianStep;
      const Vec6 rp = f(se3_exp(Twist::FromVector(d)) * x);
      const Vec6 rm = f(se3_exp(Twist::FromVector(-d)) * x);
      j.col(k) = (rp - rm) / (2.0 * kJacobianStep);
    }
    h.noalias() += w * j.transpose() * j;
    g.noalias() += w * j.transpose() * r;
  }

  const std::optional<AbsoluteConstraint>& abs_;
  const std::optional<RelativeConstraint>& rel_;
  double rotation_scale_;
};

}  // namespace

double tukey_loss(double s, double a) {
  const double a2 = a * a;
  if (s >= a2) return a2 / 3.0;
  const double v = 1.0 - s / a2;
  return a2 / 3.0 * (1.0 - v * v * v);
}

double cauchy_loss(double s, double a) {
  const double a2 = a * a;
  return a2 * std::log1p(s / a2);
}

double tukey_loss_derivative(double s, double a) {
  const double a2 = a * a;
  if (s >= a2) return 0.0;
  const double v = 1.0 - s / a2;
  return v * v;
}

double cauchy_loss_derivative(double s, double a) { return 1.0 / (1.0 + s / (a * a)); }

Vec6 absolute_residual(const Pose& x, const Pose& z) { return se3_log(z.inverse() * x).vector(); }

Vec6 relative_residual(const Pose& x_prev, const Pose& x, const Pose& z_delta) {
  return se3_log(z_delta.inverse() * (x_prev.inverse() * x)).vector();
}

FrameOptimizationResult optimize_frame(const Pose& x_init,
                                       const std::optional<AbsoluteConstraint>& abs,
                                       const std::optional<RelativeConstraint>& rel,
                                       const FrameOptimizerOptions& options) {
  if (!abs && !rel) throw Error("optimize_frame: no constraints");
  const FrameProblem problem(abs, rel, options.rotation_scale);

  Pose x = x_init;
  double cost = problem.cost(x);
  double lambda = 0.0;
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    Mat6 h;
    Vec6 g;
    problem.linearize(x, h, g);
    if (g.norm() == 0.0) {
      converged = true;
      break;
    }
    const Eigen::SelfAdjointEigenSolver<Mat6> eig(h, Eigen::EigenvaluesOnly);
    const double max_ev = eig.eigenvalues()(5);
    if (eig.eigenvalues()(0) <= 1e-12 * max_ev) lambda = std::max(lambda, 1e-6 * max_ev);

    const Mat6 damped = h + lambda * Mat6::Identity();
    const Vec6 delta = damped.ldlt().solve(-g);
    if (!delta.allFinite()) break;
    const Pose candidate = se3_exp(Twist::FromVector(delta)) * x;
    const double candidate_cost = problem.cost(candidate);
    if (candidate_cost <= cost) {
      x = candidate;
      cost = candidate_cost;
      lambda *= 0.1;
      if (lambda < 1e-12) lambda = 0.0;
      if (delta.norm() < options.step_tolerance) {
        converged = true;
        ++iter;
        break;
      }
    } else {
      if (delta.norm() < options.step_tolerance) {
        // Rejected step already below tolerance: at the floating-point floor.
        converged = true;
        ++iter;
        break;
      }
      lambda = lambda == 0.0 ? 1e-6 * std::max(max_ev, 1e-12) : lambda * 10.0;
    }
  }

  FrameOptimizationResult result;
  result.pose = x;
  result.cost = cost;
  result.iterations = iter;
  result.converged = converged;
  result.absolute_weight = problem.abs_weight(x);
  result.relative_weight = problem.rel_weight(x);
  return result;
}

}  // namespace georef
