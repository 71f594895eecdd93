#include "esn/rng.hpp"

#include <cmath>

#include "esn/errors.hpp"

namespace esn {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

void RngStream::jump() {
    // Standard xoshiro256++ jump polynomial: advances the state 2^128 draws.
    static constexpr std::uint64_t kJump[] = {0x180ec6d33cfd0abaULL, 0xd5a61266f0c9392cULL,
                                              0xa9582618e03fc9aaULL, 0x39abdc4529b1661cULL};
    std::array<std::uint64_t, 4> acc{};
    for (std::uint64_t poly : kJump) {
        for (int b = 0; b < 64; ++b) {
            if (poly & (1ULL << b)) {
                for (int i = 0; i < 4; ++i) acc[i] ^= state_[i];
            }
            next_u64();
        }
    }
    state_ = acc;
}

RngStream RngStream::substream(std::uint64_t id) const {
    RngStream out(seed_);
    for (std::uint64_t i = 0; i <= id; ++i) out.jump();
    return out;
}

double RngStream::uniform(double lo, double hi) {
    if (lo > hi) throw ParameterError("uniform: lo > hi");
    const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

double RngStream::gaussian(double mean, double std_dev) {
    if (std_dev < 0.0) throw ParameterError("gaussian: std < 0");
    if (has_cached_gaussian_) {
        has_cached_gaussian_ = false;
        return mean + std_dev * cached_gaussian_;
    }
    // Box-Muller on two fresh uniforms; u1 strictly positive.
    double u1 = 0.0;
    do {
        u1 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    } while (u1 <= 0.0);
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_gaussian_ = r * std::sin(theta);
    has_cached_gaussian_ = true;
    return mean + std_dev * r * std::cos(theta);
}

Eigen::VectorXd RngStream::uniform_vec(double lo, double hi, Eigen::Index count) {
    if (count < 0) throw ParameterError("uniform_vec: negative count");
    Eigen::VectorXd out(count);
    for (Eigen::Index i = 0; i < count; ++i) out[i] = uniform(lo, hi);
    return out;
}

Eigen::VectorXd RngStream::gaussian_vec(double mean, double std_dev, Eigen::Index count) {
    if (count < 0) throw ParameterError("gaussian_vec: negative count");
    Eigen::VectorXd out(count);
    for (Eigen::Index i = 0; i < count; ++i) out[i] = gaussian(mean, std_dev);
    return out;
}

Eigen::VectorXd RngStream::uniform_ball(Eigen::Index dim, double radius) {
    if (dim < 1) throw ParameterError("uniform_ball: dim < 1");
    if (radius < 0.0) throw ParameterError("uniform_ball: radius < 0");
    if (radius == 0.0) return Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd dir = gaussian_vec(0.0, 1.0, dim);
    double norm = dir.norm();
    while (norm == 0.0) {  // probability-zero regeneration
        dir = gaussian_vec(0.0, 1.0, dim);
        norm = dir.norm();
    }
    const double u = uniform(0.0, 1.0);
    const double r = radius * std::pow(u, 1.0 / static_cast<double>(dim));
    return dir * (r / norm);
}

}  // namespace esn
