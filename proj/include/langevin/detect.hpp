#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "langevin/model.hpp"
#include "langevin/sampler.hpp"
#include "langevin/schedule.hpp"

namespace langevin {

class SearchSpaceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct DetectionResult {
    Eigen::VectorXd xhat;
    double residual = 0.0;  // ||y - H xhat||
    std::size_t trajectories_used = 0;
    std::size_t selected = 0;  // index into the candidate list
    std::int64_t runtime_ns = 0;
};

/// Nearest constellation point per coordinate; ties go to the lower point.
Eigen::VectorXd project_constellation(const Eigen::VectorXd& x, const Constellation& c);

/// Candidate with the smallest ||y - Hx||^2, ties to the lowest index.
DetectionResult select_candidate(const std::vector<Eigen::VectorXd>& candidates, const ForwardModel& model);

struct LangevinDetector {
    ScheduleConfig schedule;
    DynamicsParams params;
    std::string scheme;  // empty: default_scheme(params.order)
    std::size_t trajectories = 20;
};

/// Runs `trajectories` annealed chains in spectral coordinates, maps each final
/// chi back through V, projects onto the alphabet and keeps the candidate with
/// the smallest residual. Trajectory u is seeded with derive_seed(seed, {u}).
DetectionResult langevin_detect(const ForwardModel& model, const Constellation& c, const LangevinDetector& detector,
                                std::uint64_t seed, unsigned threads = 1);

/// Regularized least squares (H^T H + (2 sigma0^2 / es) I)^{-1} H^T y in the
/// real-valued model, projected onto the alphabet. `model.sigma0()` is the
/// per-real-dimension std, so 2 sigma0^2 is the complex noise variance.
Eigen::VectorXd mmse_detect(const ForwardModel& model, const Constellation& c, double es);

/// Zero-forcing V-BLAST over the real coordinates: repeatedly detect the
/// stream with the smallest pseudo-inverse row norm, decide it, cancel it.
/// Throws std::domain_error when the remaining channel is rank deficient.
Eigen::VectorXd vblast_detect(const ForwardModel& model, const Constellation& c);

/// Exhaustive ML search over all points^(2 n_u) real symbol vectors.
/// Throws SearchSpaceError when that count exceeds max_candidates.
Eigen::VectorXd ml_oracle(const ForwardModel& model, const Constellation& c, std::uint64_t max_candidates = 1000000);

struct ErrorCount {
    std::uint64_t errors = 0;
    std::uint64_t symbols = 0;

    double rate() const { return symbols == 0 ? 0.0 : static_cast<double>(errors) / symbols; }
    ErrorCount& operator+=(const ErrorCount& o) {
        errors += o.errors;
        symbols += o.symbols;
        return *this;
    }
};

/// Complex symbols (coordinate j paired with j + n_u) decided wrongly.
ErrorCount count_symbol_errors(const Eigen::VectorXd& decision, const Eigen::VectorXd& truth);

/// Fraction of complex symbols decided incorrectly across all vectors.
double symbol_error_rate(const std::vector<Eigen::VectorXd>& decisions, const std::vector<Eigen::VectorXd>& truths);

}  // namespace langevin
