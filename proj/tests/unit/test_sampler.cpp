#include <cmath>
#include <map>
#include <set>

#include <doctest.h>

#include "langevin/sampler.hpp"
#include "langevin/schedule.hpp"
#include "langevin/score.hpp"
#include "test_support.hpp"

using namespace langevin;

namespace {

SamplerState make_state(const Eigen::VectorXd& x, const Eigen::VectorXd& v, const Eigen::VectorXd& z) {
    SamplerState s;
    s.x = x;
    s.v = v;
    s.z = z;
    return s;
}

AnnealSchedule single_level(const Eigen::VectorXd& c, const Eigen::VectorXd& m, double eps, double tau, int t) {
    AnnealSchedule s;
    s.sigmas = {1.0, 0.0};
    s.epsilons = {eps};
    s.precond = {c};
    s.mass = {m};
    s.tau = tau;
    s.t_inner = t;
    return s;
}

// Exact stationary covariance of a composed scheme on U(x) = x^T Lambda x / 2.
// Each sub-flow is affine, X <- F X + noise with a known covariance; F is read
// off the flow functions at tau = 0 and the noise covariances are the closed
// forms of the O and overdamped updates.
Eigen::MatrixXd exact_stationary_covariance(const SchemeSpec& scheme, const DynamicsParams& p, const Eigen::MatrixXd& lambda,
                                            const Eigen::VectorXd& c, const Eigen::VectorXd& m, double eps, double tau) {
    const Eigen::Index d = lambda.rows();
    const int blocks = scheme.order;
    const Eigen::Index n = blocks * d;
    auto unpack = [&](const Eigen::VectorXd& s) {
        SamplerState st;
        st.x = s.head(d);
        st.v = blocks >= 2 ? Eigen::VectorXd(s.segment(d, d)) : Eigen::VectorXd::Zero(d);
        st.z = blocks == 3 ? Eigen::VectorXd(s.segment(2 * d, d)) : Eigen::VectorXd::Zero(d);
        return st;
    };
    auto pack = [&](const SamplerState& st) {
        Eigen::VectorXd s(n);
        s.head(d) = st.x;
        if (blocks >= 2) s.segment(d, d) = st.v;
        if (blocks == 3) s.segment(2 * d, d) = st.z;
        return s;
    };
    Rng unused(0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    for (const SubStep& sub : scheme.steps) {
        const double dt = sub.fraction * eps;
        Eigen::MatrixXd f(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            SamplerState st = unpack(Eigen::VectorXd::Unit(n, j));
            switch (sub.flow) {
                case Flow::A: flow_A(st, dt, c, m); break;
                case Flow::B: flow_B(st, dt, c, -lambda * st.x); break;
                case Flow::C: flow_C(st, dt, p.lambda); break;
                case Flow::O:
                    if (p.order == 2)
                        flow_O_order2(st, dt, p.gamma, 0.0, m, unused);
                    else
                        flow_O_order3(st, dt, p.lambda, p.alpha, 0.0, m, unused);
                    break;
                case Flow::Overdamped: flow_overdamped(st, dt, c, -lambda * st.x, 0.0, unused); break;
            }
            f.col(j) = pack(st);
        }
        Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(n, n);
        if (sub.flow == Flow::O && p.order == 2)
            noise.block(d, d, d, d) = (tau * (1.0 - std::exp(-2.0 * p.gamma * dt)) * m).asDiagonal();
        if (sub.flow == Flow::O && p.order == 3) {
            const double theta = std::exp(-p.alpha * dt);
            noise.block(2 * d, 2 * d, d, d) = (tau * (1.0 - theta * theta) * m).asDiagonal();
        }
        if (sub.flow == Flow::Overdamped) noise.block(0, 0, d, d) = (tau * dt * c).asDiagonal();
        a = f * a;
        q = f * q * f.transpose() + noise;
    }
    // Sigma = A Sigma A^T + Q as a linear system in vec(Sigma).
    Eigen::MatrixXd k = Eigen::MatrixXd::Identity(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) k.block(i * n, j * n, n, n) -= a(i, j) * a;
    const Eigen::VectorXd vec = k.fullPivLu().solve(q.reshaped());
    return vec.reshaped(n, n);
}

}  // namespace

TEST_CASE("flow_A") {
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(2);
    SamplerState s = make_state(Eigen::Vector2d(1, 2), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero());
    flow_A(s, 0.7, one, one);
    CHECK(s.x == Eigen::Vector2d(1, 2));

    s.v = Eigen::Vector2d(1, 0);
    s.x.setZero();
    flow_A(s, 1.0, one, one);
    CHECK(s.x == Eigen::Vector2d(1, 0));

    Rng rng(1);
    const Eigen::VectorXd c = rng.normal_vector(2).cwiseAbs(), m = rng.normal_vector(2).cwiseAbs();
    SamplerState a = make_state(rng.normal_vector(2), rng.normal_vector(2), Eigen::Vector2d::Zero());
    SamplerState b = a;
    flow_A(a, 0.3, c, m);
    flow_A(a, 0.2, c, m);
    flow_A(b, 0.5, c, m);
    CHECK((a.x - b.x).norm() <= 1e-12);
}

TEST_CASE("flow_B") {
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(2);
    SamplerState s = make_state(Eigen::Vector2d(1, 0), Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d::Zero());
    flow_B(s, 0.9, one, Eigen::Vector2d::Zero());
    CHECK(s.v == Eigen::Vector2d(0.5, 0.5));
    flow_B(s, 0.5, one, -s.x);
    CHECK(s.v == Eigen::Vector2d(0.0, 0.5));

    Rng rng(2);
    const Eigen::VectorXd c = rng.normal_vector(2).cwiseAbs();
    SamplerState a = make_state(rng.normal_vector(2), rng.normal_vector(2), Eigen::Vector2d::Zero());
    SamplerState b = a;
    QuadraticScore quad(Eigen::Matrix2d(Eigen::Vector2d(1, 3).asDiagonal()));
    flow_B(a, 0.25, c, quad.score(a.x, 0));
    flow_B(a, 0.25, c, quad.score(a.x, 0));
    flow_B(b, 0.5, c, quad.score(b.x, 0));
    CHECK((a.v - b.v).norm() <= 1e-12);

    CHECK_THROWS_AS(flow_B(a, 0.1, c, Eigen::Vector2d(NAN, 0)), DivergenceError);
    CHECK_THROWS_AS(flow_B(a, 0.1, c, Eigen::Vector3d::Zero()), DimensionError);
}

TEST_CASE("flow_C and the half kick of the third-order scheme") {
    SamplerState s = make_state(Eigen::Vector2d::Zero(), Eigen::Vector2d(1, 1), Eigen::Vector2d::Zero());
    flow_C(s, 0.5, 1.0);
    CHECK(s.v == Eigen::Vector2d(1, 1));
    s.z = Eigen::Vector2d(1, 0);
    flow_C(s, 0.5, 1.0);
    CHECK(s.v == Eigen::Vector2d(1.5, 1));

    // v_{k+1/2} = v + (eps/2)(C grad + lambda z).
    Rng rng(3);
    const double eps = 0.2, lambda = 0.7;
    const Eigen::VectorXd c = rng.normal_vector(2).cwiseAbs();
    const Eigen::VectorXd g = rng.normal_vector(2);
    SamplerState t = make_state(rng.normal_vector(2), rng.normal_vector(2), rng.normal_vector(2));
    const Eigen::VectorXd expected = t.v + (eps / 2) * (c.cwiseProduct(g) + lambda * t.z);
    flow_B(t, eps / 2, c, g);
    flow_C(t, eps / 2, lambda);
    CHECK((t.v - expected).norm() <= 1e-15);
}

TEST_CASE("flow_O_order2") {
    Rng rng(4);
    const Eigen::VectorXd m = Eigen::Vector2d(2.0, 0.5);
    SamplerState s = make_state(Eigen::Vector2d::Zero(), Eigen::Vector2d(1, -2), Eigen::Vector2d::Zero());
    flow_O_order2(s, 0.0, 1.0, 1.0, m, rng);
    CHECK(s.v == Eigen::Vector2d(1, -2));
    flow_O_order2(s, 0.3, 2.0, 0.0, m, rng);
    CHECK((s.v - std::exp(-0.6) * Eigen::Vector2d(1, -2)).norm() <= 1e-15);

    // gamma dt large: fresh draw from N(0, tau M).
    const double tau = 0.7;
    Eigen::Vector2d sum_sq = Eigen::Vector2d::Zero();
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        s.v = Eigen::Vector2d(5, 5);
        flow_O_order2(s, 50.0, 1.0, tau, m, rng);
        sum_sq += s.v.cwiseAbs2();
    }
    const Eigen::Vector2d var = sum_sq / draws;
    CHECK(std::abs(var[0] / (tau * m[0]) - 1.0) <= 0.03);
    CHECK(std::abs(var[1] / (tau * m[1]) - 1.0) <= 0.03);
}

TEST_CASE("flow_O_order3") {
    Rng rng(5);
    const Eigen::VectorXd m = Eigen::VectorXd::Ones(1);
    SamplerState s = make_state(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.4), Eigen::VectorXd::Constant(1, 1.0));
    flow_O_order3(s, 0.0, 1.0, 1.2, 1.0, m, rng);
    CHECK(s.z[0] == 1.0);
    CHECK(s.v[0] == 0.4);

    // alpha dt = ln 2: theta = 0.5, kappa = sqrt(0.75).
    const double alpha = 1.3, lambda = 0.8, dt = std::log(2.0) / alpha, tau = 0.6;
    Rng a(77), b(77);
    s.z[0] = 1.0;
    flow_O_order3(s, dt, lambda, alpha, tau, m, a);
    const double expected = 0.5 * 1.0 - 0.5 * (lambda / alpha) * 0.4 + std::sqrt(0.75) * std::sqrt(tau) * b.normal();
    CHECK(s.z[0] == doctest::Approx(expected).epsilon(1e-14));

    // v = 0, tau = 1, M = I: independent chains relaxed to stationarity.
    const int chains = 100000;
    double sum_sq = 0.0;
    for (int i = 0; i < chains; ++i) {
        SamplerState c = make_state(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
        for (int k = 0; k < 60; ++k) flow_O_order3(c, 0.1, 1.0, 1.0, 1.0, m, rng);
        sum_sq += c.z[0] * c.z[0];
    }
    CHECK(std::abs(sum_sq / chains - 1.0) <= 0.03);
}

TEST_CASE("overdamped step") {
    Rng a(8), b(8);
    const Eigen::VectorXd c = Eigen::Vector2d(0.5, 2.0);
    const Eigen::VectorXd g = Eigen::Vector2d(1.0, -1.0);
    SamplerState s = make_state(Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero());
    flow_overdamped(s, 0.4, c, g, 0.3, a);
    Eigen::Vector2d expected;
    for (int i = 0; i < 2; ++i) {
        const double x0 = i == 0 ? 0.1 : 0.2;
        expected[i] = x0 + 0.2 * c[i] * g[i] + std::sqrt(0.3 * 0.4 * c[i]) * b.normal();
    }
    CHECK((s.x - expected).norm() <= 1e-15);
    CHECK_THROWS_AS(flow_overdamped(s, 0.1, c, Eigen::Vector2d(INFINITY, 0), 1.0, a), DivergenceError);
}

TEST_CASE("compile_scheme letter sequences and fractions") {
    auto letters_and_fractions = [](const SchemeSpec& s) {
        std::string out;
        for (const auto& sub : s.steps) out += flow_letter(sub.flow) + std::to_string(static_cast<int>(sub.fraction * 2));
        return out;
    };
    CHECK(letters_and_fractions(compile_scheme("ABO", 2)) == "A2B2O2");
    CHECK(letters_and_fractions(compile_scheme("BAOAB", 2)) == "B1A1O2A1B1");
    CHECK(letters_and_fractions(compile_scheme("BCOABC", 3)) == "B1C1A2O2B1C1");
    CHECK(letters_and_fractions(compile_scheme("(BC)OA(BC)", 3)) == "B1C1A2O2B1C1");
    CHECK(letters_and_fractions(compile_scheme("BACOCAB", 3)) == "B1A1C1O2C1A1B1");
    CHECK(compile_scheme("ULA", 1).steps.size() == 1);
    CHECK(compile_scheme("ABO", 2).steps.size() == 3);

    const std::vector<std::pair<std::string, int>> all = {{"ABO", 2}, {"BAOAB", 2}, {"BCOABC", 3}, {"BACOCAB", 3}, {"ULA", 1}};
    for (const auto& [name, order] : all) {
        std::map<char, double> total;
        for (const auto& sub : compile_scheme(name, order).steps) total[flow_letter(sub.flow)] += sub.fraction;
        for (auto [letter, sum] : total) CHECK(sum == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(compile_scheme("BAOAB", 3), std::invalid_argument);
    CHECK_THROWS_AS(compile_scheme("BACOCAB", 2), std::invalid_argument);
    CHECK_THROWS_AS(compile_scheme("ULA", 2), std::invalid_argument);
    CHECK_THROWS_AS(compile_scheme("ABO", 1), std::invalid_argument);
    CHECK_THROWS_AS(compile_scheme("XYZ", 2), std::invalid_argument);
    CHECK_THROWS_AS(compile_scheme("AB", 2), std::invalid_argument);
    CHECK(default_scheme(1) == "ULA");
    CHECK(default_scheme(2) == "ABO");
    CHECK(compile_scheme(default_scheme(3), 3).letters() == "BCAOBC");
}

TEST_CASE("ABO and (BC)OA(BC) steps match the hand-expanded updates") {
    Rng rng(12);
    const Eigen::MatrixXd lambda = Eigen::Matrix2d(Eigen::Vector2d(1.5, 0.7).asDiagonal());
    QuadraticScore score(lambda);
    const Eigen::VectorXd c = Eigen::Vector2d(0.8, 1.6), m = Eigen::Vector2d(1.2, 0.4);
    const double eps = 0.15, tau = 0.4;
    AnnealSchedule sch = single_level(c, m, eps, tau, 1);
    const LevelView lv = level_view(sch, 0);
    const Eigen::ArrayXd ca = c.array(), ma = m.array();

    SUBCASE("ABO") {
        DynamicsParams p;
        p.order = 2;
        p.gamma = 0.9;
        SchemeStepper stepper(compile_scheme("ABO", 2), p);
        SamplerState s = make_state(rng.normal_vector(2), rng.normal_vector(2), Eigen::Vector2d::Zero());
        const SamplerState s0 = s;
        Rng a(3), b(3);
        stepper.step(s, score, lv, a);
        const Eigen::VectorXd x1 = s0.x.array() + eps * ca * s0.v.array() / ma;
        const Eigen::VectorXd vh = s0.v.array() + eps * ca * (-lambda * x1).array();
        const double decay = std::exp(-p.gamma * eps);
        Eigen::VectorXd v1(2);
        for (int i = 0; i < 2; ++i) v1[i] = decay * vh[i] + std::sqrt(tau * (1 - decay * decay)) * std::sqrt(m[i]) * b.normal();
        CHECK((s.x - x1).norm() <= 1e-14);
        CHECK((s.v - v1).norm() <= 1e-14);
    }
    SUBCASE("(BC)OA(BC)") {
        DynamicsParams p;
        p.order = 3;
        p.lambda = 0.9;
        p.alpha = 1.1;
        SchemeStepper stepper(compile_scheme("(BC)OA(BC)", 3), p);
        SamplerState s = make_state(rng.normal_vector(2), rng.normal_vector(2), rng.normal_vector(2));
        const SamplerState s0 = s;
        Rng a(5), b(5);
        stepper.step(s, score, lv, a);
        const Eigen::ArrayXd vh = s0.v.array() + (eps / 2) * (ca * (-lambda * s0.x).array() + p.lambda * s0.z.array());
        const Eigen::VectorXd x1 = s0.x.array() + eps * ca * vh / ma;
        const double theta = std::exp(-p.alpha * eps), kappa = std::sqrt(1 - theta * theta);
        Eigen::VectorXd z1(2);
        for (int i = 0; i < 2; ++i)
            z1[i] = theta * s0.z[i] - (1 - theta) * (p.lambda / p.alpha) * vh[i] + kappa * std::sqrt(tau) * std::sqrt(m[i]) * b.normal();
        const Eigen::VectorXd v1 = vh + (eps / 2) * (ca * (-lambda * x1).array() + p.lambda * z1.array());
        CHECK((s.x - x1).norm() <= 1e-14);
        CHECK((s.z - z1).norm() <= 1e-14);
        CHECK((s.v - v1).norm() <= 1e-14);
    }
}

TEST_CASE("stepper evaluates the score once per distinct position") {
    QuadraticScore score(Eigen::Matrix2d::Identity());
    AnnealSchedule sch = single_level(Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones(), 0.1, 1.0, 1);
    DynamicsParams p;
    SchemeStepper baoab(compile_scheme("BAOAB", 2), p);
    Rng rng(1);
    SamplerState s = initial_state(2, sch, p, rng);
    for (int i = 0; i < 10; ++i) baoab.step(s, score, level_view(sch, 0), rng);
    // The trailing B of one step and the leading B of the next share x.
    CHECK(baoab.score_evaluations() == 11);
}

TEST_CASE("anneal_run") {
    const Eigen::MatrixXd lambda = Eigen::Matrix2d(Eigen::Vector2d(1, 4).asDiagonal());
    QuadraticScore score(lambda);
    DynamicsParams p;
    const SchemeSpec scheme = compile_scheme("BAOAB", 2);

    SUBCASE("no steps returns the initial state") {
        AnnealSchedule sch = single_level(Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones(), 0.1, 1.0, 0);
        Rng rng(1);
        SamplerState init = initial_state(2, sch, p, rng);
        const SamplerState out = anneal_run(score, sch, p, scheme, rng, init);
        CHECK(out.x == init.x);
        CHECK(out.v == init.v);
    }
    SUBCASE("identical seeds give identical output") {
        AnnealSchedule sch = single_level(Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones(), 0.1, 1.0, 50);
        Rng a(9), b(9);
        CHECK(anneal_run(score, sch, p, scheme, a).x == anneal_run(score, sch, p, scheme, b).x);
    }
    SUBCASE("early stop after the iteration budget") {
        AnnealSchedule sch;
        sch.sigmas = {1.0, 0.5, 0.0};
        sch.epsilons = {0.1, 0.05};
        sch.precond = {Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones()};
        sch.mass = sch.precond;
        sch.t_inner = 10;
        sch.max_total_iterations = 13;
        Rng a(4), b(4);
        const SamplerState stopped = anneal_run(score, sch, p, scheme, a);
        SamplerState manual = initial_state(2, sch, p, b);
        SchemeStepper stepper(scheme, p);
        for (int k = 0; k < 10; ++k) stepper.step(manual, score, level_view(sch, 0), b);
        for (int k = 0; k < 3; ++k) stepper.step(manual, score, level_view(sch, 1), b);
        CHECK(stopped.x == manual.x);
        CHECK(stopped.level == 1);
    }
    SUBCASE("divergence names the level") {
        AnnealSchedule sch;
        sch.sigmas = {1.0, 0.5, 0.0};
        sch.epsilons = {0.01, 5.0};  // unstable on the second level
        sch.precond = {Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones()};
        sch.mass = sch.precond;
        sch.t_inner = 2000;
        sch.tau = 0.1;
        Rng rng(2);
        try {
            anneal_run(score, sch, p, scheme, rng);
            FAIL("expected divergence");
        } catch (const DivergenceError& e) {
            CHECK(e.level() == 1);
            CHECK(std::string(e.what()).find("level 2") != std::string::npos);
        }
    }
}

TEST_CASE("anneal_run recovers a Gaussian posterior mean") {
    Rng rng(31);
    const Eigen::MatrixXd h = Eigen::MatrixXd::Random(3, 2);
    const Eigen::VectorXd y = rng.normal_vector(3);
    AnnealSchedule sch;
    sch.sigmas = {1.0, 0.0};  // validation only; the score below is unannealed
    LinearGaussianScore exact(h, y, 0.5, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), {0.0});
    sch.epsilons = {0.05};
    sch.precond = {Eigen::Vector2d::Ones()};
    sch.mass = {Eigen::Vector2d::Ones()};
    sch.t_inner = 400;
    DynamicsParams p;
    const SchemeSpec scheme = compile_scheme("BAOAB", 2);
    const int runs = 2000;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sum_sq = Eigen::Vector2d::Zero();
    for (int r = 0; r < runs; ++r) {
        Rng chain(derive_seed(99, {static_cast<std::uint64_t>(r)}));
        const Eigen::VectorXd x = anneal_run(exact, sch, p, scheme, chain).x;
        sum += x;
        sum_sq += x.cwiseAbs2();
    }
    const Eigen::Vector2d mean = sum / runs;
    const Eigen::Vector2d se = ((sum_sq / runs - mean.cwiseAbs2()) / runs).cwiseSqrt();
    const Eigen::VectorXd target = exact.posterior_mean();
    for (int i = 0; i < 2; ++i) CHECK(std::abs(mean[i] - target[i]) <= 3.0 * se[i]);
}

TEST_CASE("ensemble_run") {
    const Eigen::MatrixXd lambda = Eigen::Matrix2d(Eigen::Vector2d(1, 4).asDiagonal());
    QuadraticScore score(lambda);
    DynamicsParams p;
    const SchemeSpec scheme = compile_scheme("ABO", 2);
    AnnealSchedule sch = single_level(Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones(), 0.1, 0.5, 20);

    const EnsembleResult one = ensemble_run(score, sch, p, scheme, 1, 5);
    Rng rng(derive_seed(5, {0}));
    CHECK(one.candidates.at(0) == anneal_run(score, sch, p, scheme, rng).x);

    const EnsembleResult serial = ensemble_run(score, sch, p, scheme, 4, 5, 1);
    const EnsembleResult parallel = ensemble_run(score, sch, p, scheme, 4, 5, 4);
    REQUIRE(serial.candidates.size() == 4);
    for (std::size_t u = 0; u < 4; ++u) CHECK(serial.candidates[u] == parallel.candidates[u]);
    std::set<double> firsts;
    for (const auto& c : serial.candidates) firsts.insert(c[0]);
    CHECK(firsts.size() == 4);
    CHECK_THROWS_AS(ensemble_run(score, sch, p, scheme, 0, 5), std::invalid_argument);
}

namespace {

// Non-finite whenever the first coordinate is positive.
class HalfPlaneScore final : public ScoreModel {
public:
    Eigen::Index dim() const override { return 2; }
    Eigen::VectorXd score(const Eigen::VectorXd& x, std::size_t) const override {
        return x[0] > 0 ? Eigen::VectorXd::Constant(2, NAN) : Eigen::VectorXd(-x);
    }
};

}  // namespace

TEST_CASE("ensemble_run excludes diverged trajectories") {
    HalfPlaneScore score;
    DynamicsParams p;
    AnnealSchedule sch = single_level(Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones(), 0.01, 0.5, 1);
    const EnsembleResult r = ensemble_run(score, sch, p, compile_scheme("BAOAB", 2), 32, 3);
    CHECK(!r.candidates.empty());
    CHECK(!r.diverged.empty());
    CHECK(r.candidates.size() + r.diverged.size() == 32);
    for (std::size_t i = 1; i < r.trajectory.size(); ++i) CHECK(r.trajectory[i] > r.trajectory[i - 1]);

    QuadraticScore blowup(-Eigen::Matrix2d::Identity() * 1e6);  // repulsive
    AnnealSchedule hot = single_level(Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones(), 1.0, 1.0, 400);
    CHECK_THROWS_AS(ensemble_run(blowup, hot, p, compile_scheme("ABO", 2), 3, 1), DivergenceError);
}

TEST_CASE("schemes of one order share the stationary x-covariance as eps shrinks") {
    const Eigen::MatrixXd lambda = Eigen::Matrix2d(Eigen::Vector2d(1, 4).asDiagonal());
    const Eigen::MatrixXd target = lambda.inverse();
    const Eigen::VectorXd c = Eigen::Vector2d(2.0, 0.5);
    DynamicsParams p2;
    p2.order = 2;
    DynamicsParams p3;
    p3.order = 3;
    p3.lambda = 1.0;
    p3.alpha = 1.2;
    const Eigen::VectorXd m = mass_from_preconditioner(c, 1.0);

    for (const auto& [order, names] : {std::pair{2, std::vector<std::string>{"ABO", "BAOAB"}},
                                       std::pair{3, std::vector<std::string>{"BCOABC", "BACOCAB"}}}) {
        const DynamicsParams& p = order == 2 ? p2 : p3;
        double spread_prev = INFINITY;
        for (double eps : {0.05, 0.01}) {
            std::vector<Eigen::MatrixXd> covs;
            for (const auto& name : names) {
                const Eigen::MatrixXd full = exact_stationary_covariance(compile_scheme(name, order), p, lambda, c, m, eps, 1.0);
                covs.push_back(full.topLeftCorner(2, 2));
                CHECK((full.topLeftCorner(2, 2) - target).norm() / target.norm() <= 0.05);
            }
            const double spread = (covs[0] - covs[1]).norm() / target.norm();
            CAPTURE(order);
            CAPTURE(eps);
            CHECK(spread < spread_prev);
            spread_prev = spread;
        }
    }
}

TEST_CASE("exact stationary moments of the splittings at the test step size") {
    const Eigen::MatrixXd lambda = Eigen::Matrix2d(Eigen::Vector2d(1, 4).asDiagonal());
    const Eigen::VectorXd c = Eigen::Vector2d(2.0, 0.5);
    const Eigen::VectorXd m = mass_from_preconditioner(c, 1.0);
    DynamicsParams p2;
    DynamicsParams p3;
    p3.order = 3;
    const Eigen::MatrixXd bx = exact_stationary_covariance(compile_scheme("BAOAB", 2), p2, lambda, c, m, 0.01, 1.0);
    CHECK((bx.topLeftCorner(2, 2) - lambda.inverse()).norm() / lambda.inverse().norm() <= 1e-3);
    CHECK((bx.bottomRightCorner(2, 2) - Eigen::MatrixXd(m.asDiagonal())).norm() / m.norm() <= 0.01);
    const Eigen::MatrixXd cx = exact_stationary_covariance(compile_scheme("BACOCAB", 3), p3, lambda, c, m, 0.01, 1.0);
    CHECK((cx.topLeftCorner(2, 2) - lambda.inverse()).norm() / lambda.inverse().norm() <= 1e-3);
    CHECK((cx.bottomRightCorner(2, 2) - Eigen::MatrixXd(m.asDiagonal())).norm() / m.norm() <= 0.01);

    // ULA targets the same law up to O(eps).
    DynamicsParams p1;
    p1.order = 1;
    const Eigen::MatrixXd ux = exact_stationary_covariance(compile_scheme("ULA", 1), p1, lambda, c, m, 0.01, 1.0);
    CHECK((ux - lambda.inverse()).norm() / lambda.inverse().norm() <= 0.02);
}
