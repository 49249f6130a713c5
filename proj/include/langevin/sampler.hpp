#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "langevin/rng.hpp"
#include "langevin/schedule.hpp"
#include "langevin/score.hpp"

namespace langevin {

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t level, long iteration, const std::string& what);

    std::size_t level() const { return level_; }
    long iteration() const { return iteration_; }

private:
    std::size_t level_;
    long iteration_;
};

struct SamplerState {
    Eigen::VectorXd x;
    Eigen::VectorXd v;  // order >= 2
    Eigen::VectorXd z;  // order 3
    std::size_t level = 0;
    long iter = 0;

    bool finite() const { return x.allFinite() && v.allFinite() && z.allFinite(); }
};

// Sub-flows. Diagonal matrices are passed as vectors.

/// x += dt C M^{-1} v.
void flow_A(SamplerState& state, double dt, const Eigen::VectorXd& c, const Eigen::VectorXd& m);
/// v += dt C score. Throws DivergenceError on a non-finite score.
void flow_B(SamplerState& state, double dt, const Eigen::VectorXd& c, const Eigen::VectorXd& score);
/// v += dt lambda z.
void flow_C(SamplerState& state, double dt, double lambda);
/// Exact OU solve: v = e^{-gamma dt} v + sqrt(tau (1 - e^{-2 gamma dt})) M^{1/2} w.
void flow_O_order2(SamplerState& state, double dt, double gamma, double tau, const Eigen::VectorXd& m, Rng& rng);
/// z = theta z - (1 - theta)(lambda / alpha) v + kappa sqrt(tau) M^{1/2} w,
/// theta = e^{-alpha dt}, kappa = sqrt(1 - theta^2).
void flow_O_order3(SamplerState& state, double dt, double lambda, double alpha, double tau, const Eigen::VectorXd& m,
                   Rng& rng);
/// Pre-conditioned overdamped step x += (dt/2) C score + sqrt(tau dt C) w.
void flow_overdamped(SamplerState& state, double dt, const Eigen::VectorXd& c, const Eigen::VectorXd& score,
                     double tau, Rng& rng);

enum class Flow { A, B, C, O, Overdamped };

char flow_letter(Flow f);

struct SubStep {
    Flow flow;
    double fraction;  // of the level step size
};

struct SchemeSpec {
    std::string name;
    int order = 2;
    std::vector<SubStep> steps;

    // Each letter present must propagate for a total fraction of 1; C only
    // for order 3; O required for orders 2 and 3.
    void validate() const;
    std::string letters() const;
};

/// ULA (order 1), ABO / BAOAB (order 2), BCOABC (alias "(BC)OA(BC)") /
/// BACOCAB (order 3). Any other string over {A, B, C, O} is accepted as a
/// splitting in execution order where a letter appearing k times takes
/// step fraction 1/k.
SchemeSpec compile_scheme(const std::string& name, int order);

/// Default scheme per order: ULA, ABO, (BC)OA(BC).
std::string default_scheme(int order);

/// Parameters of one level as seen by the stepper.
struct LevelView {
    std::size_t level = 0;
    double eps = 0.0;
    const Eigen::VectorXd* c = nullptr;
    const Eigen::VectorXd* m = nullptr;
    double tau = 1.0;
};

LevelView level_view(const AnnealSchedule& schedule, std::size_t level);

/// Applies one composed scheme step. Scores are evaluated at the current x for
/// every B sub-flow; an evaluation is reused only when x and the level are
/// bitwise unchanged since the previous one.
class SchemeStepper {
public:
    SchemeStepper(SchemeSpec scheme, DynamicsParams params);

    void step(SamplerState& state, const ScoreModel& score, const LevelView& level, Rng& rng);

    const SchemeSpec& scheme() const { return scheme_; }
    const DynamicsParams& params() const { return params_; }
    std::uint64_t score_evaluations() const { return evaluations_; }

private:
    const Eigen::VectorXd& score_at(const SamplerState& state, const ScoreModel& score, std::size_t level);

    SchemeSpec scheme_;
    DynamicsParams params_;
    Eigen::VectorXd cached_x_;
    Eigen::VectorXd cached_score_;
    std::size_t cached_level_ = 0;
    bool cache_valid_ = false;
    std::uint64_t evaluations_ = 0;
};

/// x0 ~ N(0, sigma1^2 I); v0, z0 ~ N(0, tau M_1) for the orders that use them.
SamplerState initial_state(Eigen::Index dim, const AnnealSchedule& schedule, const DynamicsParams& params, Rng& rng);

/// Runs t_inner steps per level for every level, warm-starting each level from
/// the previous one, and stops early once max_total_iterations steps are done.
/// Throws DivergenceError naming the level and iteration on non-finite state.
SamplerState anneal_run(const ScoreModel& score, const AnnealSchedule& schedule, const DynamicsParams& params,
                        const SchemeSpec& scheme, Rng& rng, SamplerState init);

/// Same, starting from initial_state().
SamplerState anneal_run(const ScoreModel& score, const AnnealSchedule& schedule, const DynamicsParams& params,
                        const SchemeSpec& scheme, Rng& rng);

struct EnsembleResult {
    std::vector<Eigen::VectorXd> candidates;  // final x of surviving trajectories, in trajectory order
    std::vector<std::size_t> trajectory;      // trajectory index of each candidate
    std::vector<std::string> diverged;        // diagnostics of excluded trajectories
};

/// U independent anneal_runs; trajectory u uses Rng(derive_seed(seed, {u})).
/// Results do not depend on `threads`. Throws DivergenceError if every
/// trajectory diverges.
EnsembleResult ensemble_run(const ScoreModel& score, const AnnealSchedule& schedule, const DynamicsParams& params,
                            const SchemeSpec& scheme, std::size_t trajectories, std::uint64_t seed,
                            unsigned threads = 1);

}  // namespace langevin
