#include "langevin/sampler.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "langevin/parallel.hpp"

namespace langevin {

namespace {

std::string divergence_message(std::size_t level, long iteration, const std::string& what) {
    std::ostringstream os;
    os << "divergence at level " << level + 1 << ", iteration " << iteration << ": " << what;
    return os.str();
}

void add_scaled_noise(Eigen::VectorXd& target, double scale, const Eigen::VectorXd& m, Rng& rng) {
    if (scale == 0.0) return;
    for (Eigen::Index i = 0; i < target.size(); ++i) target[i] += scale * std::sqrt(m[i]) * rng.normal();
}

}  // namespace

DivergenceError::DivergenceError(std::size_t level, long iteration, const std::string& what)
    : std::runtime_error(divergence_message(level, iteration, what)), level_(level), iteration_(iteration) {}

void flow_A(SamplerState& state, double dt, const Eigen::VectorXd& c, const Eigen::VectorXd& m) {
    state.x.array() += dt * c.array() * state.v.array() / m.array();
}

void flow_B(SamplerState& state, double dt, const Eigen::VectorXd& c, const Eigen::VectorXd& score) {
    if (score.size() != state.v.size()) throw DimensionError("flow_B: score dimension mismatch");
    if (!score.allFinite()) throw DivergenceError(state.level, state.iter, "non-finite score");
    state.v.array() += dt * c.array() * score.array();
}

void flow_C(SamplerState& state, double dt, double lambda) { state.v += (dt * lambda) * state.z; }

void flow_O_order2(SamplerState& state, double dt, double gamma, double tau, const Eigen::VectorXd& m, Rng& rng) {
    const double decay = std::exp(-gamma * dt);
    state.v *= decay;
    add_scaled_noise(state.v, std::sqrt(tau * (1.0 - decay * decay)), m, rng);
}

void flow_O_order3(SamplerState& state, double dt, double lambda, double alpha, double tau, const Eigen::VectorXd& m,
                   Rng& rng) {
    const double theta = std::exp(-alpha * dt);
    const double kappa = std::sqrt(1.0 - theta * theta);
    state.z = theta * state.z - ((1.0 - theta) * lambda / alpha) * state.v;
    add_scaled_noise(state.z, kappa * std::sqrt(tau), m, rng);
}

void flow_overdamped(SamplerState& state, double dt, const Eigen::VectorXd& c, const Eigen::VectorXd& score,
                     double tau, Rng& rng) {
    if (!score.allFinite()) throw DivergenceError(state.level, state.iter, "non-finite score");
    state.x.array() += (0.5 * dt) * c.array() * score.array();
    add_scaled_noise(state.x, std::sqrt(tau * dt), c, rng);
}

char flow_letter(Flow f) {
    switch (f) {
        case Flow::A: return 'A';
        case Flow::B: return 'B';
        case Flow::C: return 'C';
        case Flow::O: return 'O';
        case Flow::Overdamped: return 'U';
    }
    return '?';
}

std::string SchemeSpec::letters() const {
    std::string out;
    for (const auto& s : steps) out += flow_letter(s.flow);
    return out;
}

void SchemeSpec::validate() const {
    if (steps.empty()) throw std::invalid_argument("scheme '" + name + "' is empty");
    std::map<Flow, double> total;
    for (const auto& s : steps) {
        if (!(s.fraction > 0.0)) throw std::invalid_argument("scheme '" + name + "': non-positive step fraction");
        total[s.flow] += s.fraction;
    }
    for (const auto& [flow, sum] : total)
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument(std::string("scheme '") + name + "': letter " + flow_letter(flow) +
                                        " does not propagate for a total of one step");
    if (order == 1) {
        if (total.size() != 1 || !total.count(Flow::Overdamped))
            throw std::invalid_argument("order-1 scheme must be ULA");
        return;
    }
    if (total.count(Flow::Overdamped)) throw std::invalid_argument("ULA is only valid for order 1");
    if (order == 2 && total.count(Flow::C)) throw std::invalid_argument("scheme '" + name + "': C requires order 3");
    if (order == 3 && !total.count(Flow::C)) throw std::invalid_argument("scheme '" + name + "': order 3 needs C");
    for (Flow f : {Flow::A, Flow::B, Flow::O})
        if (!total.count(f))
            throw std::invalid_argument(std::string("scheme '") + name + "' is missing letter " + flow_letter(f));
}

SchemeSpec compile_scheme(const std::string& name, int order) {
    if (order < 1 || order > 3) throw std::invalid_argument("order must be 1, 2 or 3");
    SchemeSpec spec;
    spec.name = name;
    spec.order = order;
    if (name == "ULA") {
        spec.steps = {{Flow::Overdamped, 1.0}};
        spec.validate();
        return spec;
    }
    // (BC)OA(BC): half kick and coupling, drift, auxiliary OU, half kick and
    // coupling. A and O touch disjoint variables so their relative order is
    // immaterial; the listed order is kept.
    std::string letters = name;
    if (name == "BCOABC" || name == "(BC)OA(BC)") letters = "BCAOBC";
    std::map<char, int> count;
    for (char ch : letters) {
        if (ch != 'A' && ch != 'B' && ch != 'C' && ch != 'O')
            throw std::invalid_argument("unknown scheme '" + name + "'");
        ++count[ch];
    }
    for (char ch : letters) {
        const Flow f = ch == 'A' ? Flow::A : ch == 'B' ? Flow::B : ch == 'C' ? Flow::C : Flow::O;
        spec.steps.push_back({f, 1.0 / count[ch]});
    }
    spec.validate();
    return spec;
}

std::string default_scheme(int order) {
    switch (order) {
        case 1: return "ULA";
        case 2: return "ABO";
        case 3: return "BCOABC";
    }
    throw std::invalid_argument("order must be 1, 2 or 3");
}

LevelView level_view(const AnnealSchedule& schedule, std::size_t level) {
    return {level, schedule.epsilons.at(level), &schedule.precond.at(level), &schedule.mass.at(level), schedule.tau};
}

SchemeStepper::SchemeStepper(SchemeSpec scheme, DynamicsParams params)
    : scheme_(std::move(scheme)), params_(params) {
    params_.validate();
    scheme_.validate();
    if (scheme_.order != params_.order) throw std::invalid_argument("scheme order does not match dynamics order");
}

const Eigen::VectorXd& SchemeStepper::score_at(const SamplerState& state, const ScoreModel& score,
                                               std::size_t level) {
    if (!(cache_valid_ && cached_level_ == level && cached_x_.size() == state.x.size() &&
          cached_x_ == state.x)) {
        cached_score_ = score.score(state.x, level);
        cached_x_ = state.x;
        cached_level_ = level;
        cache_valid_ = true;
        ++evaluations_;
    }
    return cached_score_;
}

void SchemeStepper::step(SamplerState& state, const ScoreModel& score, const LevelView& lv, Rng& rng) {
    const Eigen::VectorXd& c = *lv.c;
    const Eigen::VectorXd& m = *lv.m;
    state.level = lv.level;
    for (const auto& sub : scheme_.steps) {
        const double dt = sub.fraction * lv.eps;
        switch (sub.flow) {
            case Flow::A: flow_A(state, dt, c, m); break;
            case Flow::B: flow_B(state, dt, c, score_at(state, score, lv.level)); break;
            case Flow::C: flow_C(state, dt, params_.lambda); break;
            case Flow::O:
                if (params_.order == 2)
                    flow_O_order2(state, dt, params_.gamma, lv.tau, m, rng);
                else
                    flow_O_order3(state, dt, params_.lambda, params_.alpha, lv.tau, m, rng);
                break;
            case Flow::Overdamped: flow_overdamped(state, dt, c, score_at(state, score, lv.level), lv.tau, rng); break;
        }
    }
    if (!state.finite()) throw DivergenceError(state.level, state.iter, "non-finite state");
    ++state.iter;
}

SamplerState initial_state(Eigen::Index dim, const AnnealSchedule& schedule, const DynamicsParams& params, Rng& rng) {
    SamplerState s;
    s.x = schedule.sigmas.front() * rng.normal_vector(dim);
    const Eigen::VectorXd noise_scale = (schedule.tau * schedule.mass.front().array()).sqrt();
    s.v = params.order >= 2 ? Eigen::VectorXd(noise_scale.cwiseProduct(rng.normal_vector(dim)))
                            : Eigen::VectorXd::Zero(dim);
    s.z = params.order == 3 ? Eigen::VectorXd(noise_scale.cwiseProduct(rng.normal_vector(dim)))
                            : Eigen::VectorXd::Zero(dim);
    return s;
}

SamplerState anneal_run(const ScoreModel& score, const AnnealSchedule& schedule, const DynamicsParams& params,
                        const SchemeSpec& scheme, Rng& rng, SamplerState state) {
    schedule.validate();
    if (state.x.size() != score.dim() || state.v.size() != score.dim() || state.z.size() != score.dim())
        throw DimensionError("anneal_run: initial state does not match score dimension");
    if (schedule.dim() != score.dim()) throw DimensionError("anneal_run: schedule dimension mismatch");
    SchemeStepper stepper(scheme, params);
    long total = 0;
    const long budget = schedule.max_total_iterations.value_or(-1);
    for (std::size_t l = 0; l < schedule.levels(); ++l) {
        const LevelView lv = level_view(schedule, l);
        state.iter = 0;
        for (int k = 0; k < schedule.t_inner; ++k) {
            if (budget >= 0 && total >= budget) return state;
            stepper.step(state, score, lv, rng);
            ++total;
        }
    }
    return state;
}

SamplerState anneal_run(const ScoreModel& score, const AnnealSchedule& schedule, const DynamicsParams& params,
                        const SchemeSpec& scheme, Rng& rng) {
    SamplerState init = initial_state(score.dim(), schedule, params, rng);
    return anneal_run(score, schedule, params, scheme, rng, std::move(init));
}

EnsembleResult ensemble_run(const ScoreModel& score, const AnnealSchedule& schedule, const DynamicsParams& params,
                            const SchemeSpec& scheme, std::size_t trajectories, std::uint64_t seed,
                            unsigned threads) {
    if (trajectories < 1) throw std::invalid_argument("ensemble_run: need at least one trajectory");
    std::vector<Eigen::VectorXd> finals(trajectories);
    std::vector<std::string> errors(trajectories);
    parallel_for(trajectories, threads, [&](std::size_t u) {
        Rng rng(derive_seed(seed, {u}));
        try {
            finals[u] = anneal_run(score, schedule, params, scheme, rng).x;
        } catch (const DivergenceError& e) {
            errors[u] = "trajectory " + std::to_string(u) + ": " + e.what();
        }
    });
    EnsembleResult out;
    for (std::size_t u = 0; u < trajectories; ++u) {
        if (errors[u].empty()) {
            out.candidates.push_back(std::move(finals[u]));
            out.trajectory.push_back(u);
        } else {
            out.diverged.push_back(std::move(errors[u]));
        }
    }
    if (out.candidates.empty()) throw DivergenceError(schedule.levels() - 1, 0, "all trajectories diverged");
    return out;
}

}  // namespace langevin
