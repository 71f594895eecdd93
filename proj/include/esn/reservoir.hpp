#pragma once

#include <json.hpp>

#include "esn/linalg.hpp"
#include "esn/rng.hpp"

namespace esn {

/// Fixed random weights of an echo state network with ReLU activation:
/// x' = max(0, A x + C z + zeta). Immutable after construction.
struct ReservoirParams {
    Matrix A;     // n x n reservoir matrix
    Matrix C;     // n x d input matrix
    Vector zeta;  // n bias vector

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index d() const { return C.cols(); }

    nlohmann::json to_json() const;
    static ReservoirParams from_json(const nlohmann::json& j);
};

/// Reservoir states x_0 .. x_l stacked as rows of an (l+1) x n matrix.
using ReservoirTrajectory = Matrix;

/// Inputs for the structured (delay line + random features) initialisation.
struct StructuredInitSpec {
    int feature_count = 1;     // N
    int memory_horizon = 0;    // T0
    double ball_radius = 1.0;  // R
    double input_bound = 1.0;  // M_T0, bound on the norm of a (T0+1)-step input window
    int input_dim = 1;         // d
};

/// i.i.d. U(-weight_range, weight_range) weights with A rescaled so that
/// its 2-norm equals spectral_target exactly (C and zeta are not rescaled).
ReservoirParams init_standard(Eigen::Index n, Eigen::Index d, double weight_range,
                              double spectral_target, RngStream& rng);

/// Delay-line shift block plus random ReLU features drawn from a ball,
/// +/- doubled so that ReLU differences reproduce the linear shift dynamics.
/// Resulting dimension is n = 2 (d (T0+1) + N).
ReservoirParams init_structured(const StructuredInitSpec& spec, RngStream& rng);

Vector reservoir_step(const ReservoirParams& params, const Vector& x, const Vector& z);

/// Drives the reservoir over the input rows; returns states x_0 .. x_l with
/// x_0 = x0 as the first row.
ReservoirTrajectory reservoir_run(const ReservoirParams& params, const Vector& x0,
                                  const Matrix& inputs);

}  // namespace esn
