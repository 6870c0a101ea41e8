#pragma once

#include <Eigen/Dense>

namespace oracle {

template <typename F>
Eigen::VectorXd central_gradient(F&& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

// (grad(x + h v) - grad(x - h v)) / (2h)
template <typename G>
Eigen::VectorXd directional_gradient_difference(G&& grad, const Eigen::VectorXd& x, const Eigen::VectorXd& v, double h) {
  return (grad(x + h * v) - grad(x - h * v)) / (2 * h);
}

}  // namespace oracle
