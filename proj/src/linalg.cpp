#include "esn/linalg.hpp"

#include <Eigen/SVD>

#include "esn/errors.hpp"

namespace esn {

Vector ridge_solve(const Matrix& X, const Vector& y, double lambda) {
    if (X.rows() < 1 || X.cols() < 1) throw ParameterError("ridge_solve: empty design matrix");
    if (X.rows() != y.size()) throw ParameterError("ridge_solve: row count != target length");
    if (lambda < 0.0) throw ParameterError("ridge_solve: lambda < 0");
    if (!X.allFinite() || !y.allFinite()) throw ParameterError("ridge_solve: non-finite entries");

    Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    if (lambda == 0.0) {
        const double tol = static_cast<double>(std::max(X.rows(), X.cols())) * s(0) *
                           std::numeric_limits<double>::epsilon();
        if (s.size() < X.cols() || s(s.size() - 1) <= tol)
            throw SingularityError("ridge_solve: rank-deficient design with lambda = 0");
    }
    // w = V diag(s / (s^2 + lambda)) U^T y
    Vector coeffs = svd.matrixU().transpose() * y;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double si = s(i);
        coeffs(i) *= si / (si * si + lambda);
    }
    return svd.matrixV() * coeffs;
}

double spectral_norm(const Matrix& M) {
    if (!M.allFinite()) throw ParameterError("spectral_norm: non-finite entries");
    if (M.size() == 0) throw ParameterError("spectral_norm: empty matrix");
    if (M.isZero(0.0)) return 0.0;
    Eigen::BDCSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

}  // namespace esn
