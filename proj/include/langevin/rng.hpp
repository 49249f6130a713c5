#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace langevin {

// Every sampler, channel draw and noise draw takes one of these explicitly.
// There is no global generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return negate_ ? -normal_(engine_) : normal_(engine_); }

    // A copy that replays the same Gaussian stream with flipped signs, for
    // antithetic pairs.
    Rng antithetic() const {
        Rng copy = *this;
        copy.negate_ = !negate_;
        return copy;
    }

    double uniform() { return uniform_(engine_); }

    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    Eigen::VectorXd normal_vector(Eigen::Index n) {
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i) w[i] = normal();
        return w;
    }

    void fill_normal(Eigen::Ref<Eigen::VectorXd> w) {
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = normal();
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    bool negate_ = false;
};

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed for a work unit identified by a path of indices below an experiment
// seed, e.g. derive_seed(seed, {snr, channel, symbol, trajectory}). The result
// depends only on the path, never on execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(base ^ 0x6c616e676576696eULL);
    for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x51ed270b27a9c5d3ULL));
    return h;
}

}  // namespace langevin
