#pragma once

#include <Eigen/Dense>

namespace esn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Minimiser of sum_k ||X_k . w - y_k||^2 + lambda ||w||^2, rows of X being
/// samples. Solved through the SVD of X, never by forming X^T X. lambda = 0
/// requires full column rank (SingularityError otherwise).
Vector ridge_solve(const Matrix& X, const Vector& y, double lambda);

/// Largest singular value.
double spectral_norm(const Matrix& M);

}  // namespace esn
