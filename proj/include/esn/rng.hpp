#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

namespace esn {

/// Deterministic, platform-independent random stream (xoshiro256++ with
/// splitmix64 seeding). The same seed always yields the same bit sequence;
/// substream(id) jumps the state 2^128 * (id+1) draws ahead, so distinct
/// substreams of one seed never overlap at any practical draw count.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform draw in [lo, hi). Throws ParameterError if lo > hi.
    double uniform(double lo, double hi);

    /// Gaussian draw, mean/std parametrised. Throws ParameterError if std < 0.
    double gaussian(double mean, double std_dev);

    Eigen::VectorXd uniform_vec(double lo, double hi, Eigen::Index count);
    Eigen::VectorXd gaussian_vec(double mean, double std_dev, Eigen::Index count);

    /// Uniform draw from the closed ball of given radius in R^dim, via a
    /// normalised Gaussian direction scaled by radius * U^(1/dim).
    Eigen::VectorXd uniform_ball(Eigen::Index dim, double radius);

    /// A non-overlapping stream derived from (seed, id).
    RngStream substream(std::uint64_t id) const;

private:
    RngStream() = default;
    void jump();

    std::uint64_t seed_ = 0;
    std::array<std::uint64_t, 4> state_{};
    bool has_cached_gaussian_ = false;
    double cached_gaussian_ = 0.0;
};

}  // namespace esn
