#include "langevin/detect.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace langevin {

Eigen::VectorXd project_constellation(const Eigen::VectorXd& x, const Constellation& c) {
    Eigen::VectorXd out(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Eigen::Index best = 0;
        double best_d = std::abs(x[j] - c.points[0]);
        for (Eigen::Index k = 1; k < c.points.size(); ++k) {
            const double d = std::abs(x[j] - c.points[k]);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        out[j] = c.points[best];
    }
    return out;
}

DetectionResult select_candidate(const std::vector<Eigen::VectorXd>& candidates, const ForwardModel& model) {
    if (candidates.empty()) throw std::invalid_argument("select_candidate: no candidates");
    DetectionResult out;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double r2 = (model.y() - model.h() * candidates[i]).squaredNorm();
        if (r2 < best) {
            best = r2;
            out.selected = i;
        }
    }
    out.xhat = candidates[out.selected];
    out.residual = std::sqrt(best);
    out.trajectories_used = candidates.size();
    return out;
}

DetectionResult langevin_detect(const ForwardModel& model, const Constellation& c, const LangevinDetector& detector,
                                std::uint64_t seed, unsigned threads) {
    const auto start = std::chrono::steady_clock::now();
    const AnnealSchedule schedule =
        build_schedule(detector.schedule, detector.params, model.cols(), model.svd().s, model.sigma0());
    const SpectralDetectionScore score(model, c, schedule.sigmas);
    const SchemeSpec scheme =
        compile_scheme(detector.scheme.empty() ? default_scheme(detector.params.order) : detector.scheme,
                       detector.params.order);
    const EnsembleResult ens = ensemble_run(score, schedule, detector.params, scheme, detector.trajectories, seed, threads);
    std::vector<Eigen::VectorXd> candidates;
    candidates.reserve(ens.candidates.size());
    for (const auto& chi : ens.candidates) candidates.push_back(project_constellation(score.to_signal(chi), c));
    DetectionResult out = select_candidate(candidates, model);
    out.selected = ens.trajectory[out.selected];
    out.runtime_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
    return out;
}

Eigen::VectorXd mmse_detect(const ForwardModel& model, const Constellation& c, double es) {
    if (!(es > 0.0)) throw std::invalid_argument("mmse_detect: symbol energy must be > 0");
    const Eigen::MatrixXd& h = model.h();
    Eigen::MatrixXd gram = h.transpose() * h;
    gram.diagonal().array() += 2.0 * model.sigma0() * model.sigma0() / es;
    Eigen::LDLT<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success || !solver.isPositive() ||
        solver.vectorD().minCoeff() <= 1e-14 * std::max(1.0, solver.vectorD().maxCoeff()))
        throw std::domain_error("mmse_detect: singular system");
    return project_constellation(solver.solve(h.transpose() * model.y()), c);
}

Eigen::VectorXd vblast_detect(const ForwardModel& model, const Constellation& c) {
    const Eigen::MatrixXd& h = model.h();
    const Eigen::Index n = h.cols();
    if (h.rows() < n) throw std::domain_error("vblast_detect: needs at least as many receive as transmit dimensions");
    std::vector<Eigen::Index> remaining(n);
    std::iota(remaining.begin(), remaining.end(), 0);
    Eigen::VectorXd residual = model.y();
    Eigen::VectorXd decided(n);
    while (!remaining.empty()) {
        Eigen::MatrixXd sub(h.rows(), static_cast<Eigen::Index>(remaining.size()));
        for (std::size_t k = 0; k < remaining.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = h.col(remaining[k]);
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sub);
        cod.setThreshold(1e-12);
        if (cod.rank() < sub.cols()) throw std::domain_error("vblast_detect: rank-deficient channel");
        const Eigen::MatrixXd pinv = cod.pseudoInverse();
        Eigen::Index pick = 0;
        pinv.rowwise().squaredNorm().minCoeff(&pick);
        const double estimate = pinv.row(pick).dot(residual);
        const Eigen::Index stream = remaining[static_cast<std::size_t>(pick)];
        Eigen::VectorXd one(1);
        one[0] = estimate;
        decided[stream] = project_constellation(one, c)[0];
        residual -= decided[stream] * h.col(stream);
        remaining.erase(remaining.begin() + pick);
    }
    return decided;
}

Eigen::VectorXd ml_oracle(const ForwardModel& model, const Constellation& c, std::uint64_t max_candidates) {
    const Eigen::Index n = model.cols();
    const auto k = static_cast<std::uint64_t>(c.points.size());
    std::uint64_t total = 1;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (total > max_candidates / k + 1) throw SearchSpaceError("ml_oracle: search space too large");
        total *= k;
    }
    if (total > max_candidates) throw SearchSpaceError("ml_oracle: search space too large");

    // Odometer over symbol indices with an incrementally updated residual.
    const Eigen::MatrixXd& h = model.h();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, c.points[0]);
    Eigen::VectorXd r = model.y() - h * x;
    Eigen::VectorXd best_x = x;
    double best = r.squaredNorm();
    for (std::uint64_t count = 1; count < total; ++count) {
        Eigen::Index pos = 0;
        while (true) {
            auto& digit = idx[static_cast<std::size_t>(pos)];
            const double old = c.points[digit];
            digit = (digit + 1) % c.points.size();
            const double now = c.points[digit];
            r -= (now - old) * h.col(pos);
            x[pos] = now;
            if (digit != 0) break;
            ++pos;
        }
        // Periodic refresh keeps the incremental residual from drifting.
        if (count % 4096 == 0) r = model.y() - h * x;
        const double d = r.squaredNorm();
        if (d < best) {
            best = d;
            best_x = x;
        }
    }
    return best_x;
}

ErrorCount count_symbol_errors(const Eigen::VectorXd& decision, const Eigen::VectorXd& truth) {
    if (decision.size() != truth.size() || decision.size() % 2 != 0)
        throw DimensionError("count_symbol_errors: vectors must have equal even length");
    const Eigen::Index n = decision.size() / 2;
    ErrorCount out;
    out.symbols = static_cast<std::uint64_t>(n);
    for (Eigen::Index j = 0; j < n; ++j)
        if (decision[j] != truth[j] || decision[j + n] != truth[j + n]) ++out.errors;
    return out;
}

double symbol_error_rate(const std::vector<Eigen::VectorXd>& decisions, const std::vector<Eigen::VectorXd>& truths) {
    if (decisions.size() != truths.size()) throw DimensionError("symbol_error_rate: length mismatch");
    ErrorCount total;
    for (std::size_t i = 0; i < decisions.size(); ++i) total += count_symbol_errors(decisions[i], truths[i]);
    return total.rate();
}

}  // namespace langevin
