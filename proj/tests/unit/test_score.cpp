#include <cmath>
#include <complex>
#include <limits>

#include <doctest.h>

#include "langevin/model.hpp"
#include "langevin/schedule.hpp"
#include "langevin/score.hpp"
#include "test_support.hpp"

using namespace langevin;
using test_support::numerical_gradient;
using cd = std::complex<double>;

namespace {

// log of the uniform Gaussian mixture over `points` with std sigma, up to a constant.
double mixture_log_density(double x, double sigma, const Eigen::VectorXd& points) {
    double best = -std::numeric_limits<double>::infinity();
    for (double p : points) best = std::max(best, -(x - p) * (x - p) / (2 * sigma * sigma));
    long double acc = 0.0L;
    for (double p : points) acc += std::exp(static_cast<long double>(-(x - p) * (x - p) / (2 * sigma * sigma) - best));
    return best + static_cast<double>(std::log(acc));
}

Eigen::VectorXd binary_points() { return Eigen::Vector2d(-1.0, 1.0); }

}  // namespace

TEST_CASE("spectral likelihood score examples") {
    Eigen::VectorXd s(3);
    s << 2.0, 1.0, 0.5;
    Eigen::VectorXd chi(3);
    chi << 0.3, -0.2, 0.1;
    Eigen::VectorXd eta(4);
    eta << 1.0, 0.5, -0.4, 0.7;

    const Eigen::VectorXd at_zero = spectral_likelihood_score(chi, eta, s, 0.5, 0.0);
    for (int j = 0; j < 3; ++j) CHECK(at_zero[j] == doctest::Approx(s[j] * (eta[j] - s[j] * chi[j]) / 0.25));

    Eigen::VectorXd consistent = Eigen::VectorXd::Zero(4);
    consistent.head(3) = s.cwiseProduct(chi);
    CHECK(spectral_likelihood_score(chi, consistent, s, 0.5, 0.1).norm() == 0.0);

    const Eigen::VectorXd degenerate =
        spectral_likelihood_score(Eigen::Vector2d(0.3, 0.1), Eigen::Vector2d(2.0, -1.0), Eigen::Vector2d(1, 1), 1.0, 1.0);
    CHECK(degenerate.norm() == 0.0);
}

TEST_CASE("spectral likelihood score equals the gradient of the annealed Gaussian log-likelihood") {
    // Where sigma0^2 - sigma_l^2 s_j^2 > 0 the score is the gradient, rotated by V^T, of
    // log N(y; H x, sigma0^2 I - sigma_l^2 H H^T).
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int n_r = 3, n_u = 2;
        const Eigen::MatrixXd h = complex_to_real(sample_channel({n_r, n_u, 0.3, ChannelModel::KroneckerExponential}, rng));
        const Eigen::VectorXd y = rng.normal_vector(2 * n_r);
        ForwardModel model(h, y, 1.0);
        const auto& svd = model.svd();
        const double sigma0 = 1.0;
        const double sigma_l = 0.9 * sigma0 / svd.s[0] * rng.uniform();
        const Eigen::MatrixXd cov =
            sigma0 * sigma0 * Eigen::MatrixXd::Identity(2 * n_r, 2 * n_r) - sigma_l * sigma_l * h * h.transpose();
        const Eigen::LLT<Eigen::MatrixXd> llt(cov);
        REQUIRE(llt.info() == Eigen::Success);
        auto log_lik = [&](const Eigen::VectorXd& x) {
            const Eigen::VectorXd r = y - h * x;
            return -0.5 * r.dot(llt.solve(r));
        };
        const Eigen::VectorXd x = rng.normal_vector(2 * n_u);
        const Eigen::VectorXd oracle = svd.v.transpose() * numerical_gradient(log_lik, x, 1e-6);
        const SpectralCoords sc = to_spectral(model, x);
        const Eigen::VectorXd got = spectral_likelihood_score(sc.chi, sc.eta, svd.s, sigma0, sigma_l);
        CHECK((got - oracle).norm() <= 1e-5 * std::max(1.0, oracle.norm()));
    }
}

TEST_CASE("Gaussian-mixture conditional expectation") {
    const Constellation q16 = make_constellation("QAM16");
    CHECK(std::abs(gmm_conditional_expectation(0.0, 0.3, q16)) <= 1e-15);
    CHECK(gmm_conditional_expectation(0.5, 1.0, binary_points()) == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
    CHECK(gmm_conditional_expectation(0.9, 1e-6, q16) == doctest::Approx(3.0 / std::sqrt(10.0)));
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = 10.0 * rng.normal();
        const double e = gmm_conditional_expectation(x, 0.01 + rng.uniform(), q16);
        CHECK(std::isfinite(e));
        CHECK(e >= q16.points.minCoeff());
        CHECK(e <= q16.points.maxCoeff());
    }
}

TEST_CASE("Tweedie prior score examples") {
    const Constellation q16 = make_constellation("QAM16");
    const Eigen::VectorXd at_point = Eigen::VectorXd::Constant(3, 1.0 / std::sqrt(10.0));
    CHECK(tweedie_prior_score(at_point, 0.02, q16).cwiseAbs().maxCoeff() <= 1e-3);
    CHECK(tweedie_prior_score(Eigen::VectorXd::Zero(4), 0.5, q16).norm() <= 1e-15);
    CHECK_THROWS_AS(tweedie_prior_score(at_point, 0.0, q16), std::invalid_argument);
}

TEST_CASE("Tweedie prior score matches the mixture log-density gradient") {
    const Constellation q16 = make_constellation("QAM16");
    Rng rng(23);
    for (double sigma : {1.0, 0.1, 0.02}) {
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double x = -1.5 + 3.0 * rng.uniform();
            const double h = 1e-4 * sigma;
            const double oracle =
                (mixture_log_density(x + h, sigma, q16.points) - mixture_log_density(x - h, sigma, q16.points)) / (2 * h);
            const double got = tweedie_prior_score(Eigen::VectorXd::Constant(1, x), sigma, q16)[0];
            worst = std::max(worst, std::abs(got - oracle) / std::max(1.0, std::abs(oracle)));
        }
        CAPTURE(sigma);
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("spectral prior score") {
    const Constellation q16 = make_constellation("QAM16");
    Rng rng(6);
    const Eigen::VectorXd chi = rng.normal_vector(6);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(6, 6);
    CHECK(spectral_prior_score(chi, eye, 0.2, q16) == tweedie_prior_score(chi, 0.2, q16));

    const Eigen::MatrixXd v = test_support::random_orthogonal(6, rng);
    const Eigen::VectorXd direct = tweedie_prior_score(v * chi, 0.2, q16);
    const Eigen::VectorXd spectral = spectral_prior_score(chi, v, 0.2, q16);
    CHECK(std::abs(spectral.norm() - direct.norm()) <= 1e-10);

    // Binary alphabet: E[x | x~] = tanh(x~ / sigma^2), composed by hand.
    Constellation bpsk{"BPSK", binary_points(), 1.0};
    const double sigma = 0.7;
    const Eigen::VectorXd xt = v * chi;
    Eigen::VectorXd oracle(6);
    for (int j = 0; j < 6; ++j) oracle[j] = (std::tanh(xt[j] / (sigma * sigma)) - xt[j]) / (sigma * sigma);
    CHECK((spectral_prior_score(chi, v, sigma, bpsk) - v.transpose() * oracle).norm() <= 1e-12);
}

TEST_CASE("annealed channel likelihood score") {
    Rng rng(44);
    auto rand_c = [&](int r, int c) {
        ComplexMatrix m(r, c);
        for (int i = 0; i < m.size(); ++i) m.data()[i] = cd(rng.normal(), rng.normal());
        return m;
    };
    const ComplexMatrix h = rand_c(2, 2), p = rand_c(2, 3);
    CHECK(annealed_channel_likelihood_score(h, h * p, p, 0.3, 0.2).norm() == 0.0);

    const ComplexMatrix y = rand_c(2, 2);
    const ComplexMatrix eye = ComplexMatrix::Identity(2, 2);
    CHECK(annealed_channel_likelihood_score(h, y, eye, 0.5, 0.0).isApprox((y - h) / 0.25));

    const ComplexMatrix y3 = rand_c(2, 3);
    const double sigma0 = 0.4, gamma_l = 0.3;
    auto f = [&](const Eigen::VectorXd& packed) {
        const ComplexMatrix hh = unpack_complex(packed, 2, 2);
        return -(y3 - hh * p).squaredNorm() / (2.0 * (sigma0 * sigma0 + gamma_l * gamma_l));
    };
    const Eigen::VectorXd x = pack_complex(h);
    const Eigen::VectorXd oracle = numerical_gradient(f, x, 1e-6);
    const Eigen::VectorXd got = pack_complex(annealed_channel_likelihood_score(h, y3, p, sigma0, gamma_l));
    CHECK((got - oracle).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
    CHECK_THROWS_AS(annealed_channel_likelihood_score(h, y3, rand_c(3, 3), 0.1, 0.1), DimensionError);
}

TEST_CASE("Gaussian prior and posterior combination") {
    CHECK(gaussian_prior_score(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 1)).norm() == 0.0);
    CHECK(gaussian_prior_score(Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1))[0] ==
          -2.0);
    Rng rng(2);
    const Eigen::VectorXd mean = rng.normal_vector(3);
    const Eigen::VectorXd cov = (rng.normal_vector(3).array().abs() + 0.2).matrix();
    const Eigen::VectorXd x = rng.normal_vector(3);
    auto log_n = [&](const Eigen::VectorXd& z) { return -0.5 * ((z - mean).array().square() / cov.array()).sum(); };
    CHECK((gaussian_prior_score(x, mean, cov) - numerical_gradient(log_n, x, 1e-5)).cwiseAbs().maxCoeff() <= 1e-8);

    const Eigen::VectorXd a = rng.normal_vector(4), b = rng.normal_vector(4);
    CHECK(posterior_score(a, Eigen::VectorXd::Zero(4)) == a);
    CHECK(posterior_score(Eigen::VectorXd::Zero(4), b) == b);
    CHECK(posterior_score(a, b) == a + b);
    CHECK_THROWS_AS(posterior_score(a, Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST_CASE("complex packing round trip") {
    Rng rng(3);
    ComplexMatrix m(3, 2);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = cd(rng.normal(), rng.normal());
    CHECK(unpack_complex(pack_complex(m), 3, 2) == m);
    CHECK_THROWS_AS(unpack_complex(Eigen::VectorXd(5), 3, 2), DimensionError);
}

TEST_CASE("spectral detection score is likelihood plus rotated prior") {
    Rng rng(5);
    const Constellation q16 = make_constellation("QAM16");
    const Eigen::MatrixXd h = complex_to_real(sample_channel({4, 2, 0.5, ChannelModel::KroneckerExponential}, rng));
    ForwardModel base(h, Eigen::VectorXd::Zero(8), 0.3);
    const ForwardModel model = base.with_observation(apply_forward(base, random_symbols(2, q16, rng), rng));
    const auto sigmas = geometric_sigmas(0.4, 0.02, 5);
    SpectralDetectionScore score(model, q16, sigmas);
    CHECK(score.dim() == 4);
    const Eigen::VectorXd chi = rng.normal_vector(4);
    for (std::size_t l = 0; l < 5; ++l) {
        const Eigen::VectorXd expected =
            spectral_likelihood_score(chi, score.eta(), model.svd().s, 0.3, sigmas[l]) +
            spectral_prior_score(chi, model.svd().v, sigmas[l], q16);
        CHECK((score.score(chi, l) - expected).norm() <= 1e-12 * std::max(1.0, expected.norm()));
    }
    CHECK((score.to_signal(chi) - model.svd().v * chi).norm() == 0.0);
    CHECK_THROWS_AS(score.score(chi, 99), std::out_of_range);
}

TEST_CASE("linear Gaussian score vanishes at the closed-form posterior mean") {
    Rng rng(8);
    const Eigen::MatrixXd h = Eigen::MatrixXd::Random(5, 3);
    const Eigen::VectorXd y = rng.normal_vector(5);
    const Eigen::VectorXd mean = rng.normal_vector(3);
    const Eigen::VectorXd cov = Eigen::Vector3d(0.5, 1.0, 2.0);
    LinearGaussianScore score(h, y, 0.4, mean, cov, {0.3, 0.0});
    const Eigen::VectorXd mu = score.posterior_mean();
    CHECK(score.score(mu, 1).norm() <= 1e-10);
    const Eigen::MatrixXd precision = h.transpose() * h / 0.16 + Eigen::MatrixXd(cov.cwiseInverse().asDiagonal());
    CHECK((score.posterior_covariance() * precision - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-10);
}

TEST_CASE("every score model returns finite output for finite input") {
    Rng rng(19);
    const Constellation q16 = make_constellation("QAM16");
    const auto sigmas = geometric_sigmas(1.0, 0.01, 8);
    const Eigen::MatrixXd h = complex_to_real(sample_channel({6, 3, 0.6, ChannelModel::KroneckerExponential}, rng));
    ForwardModel model(h, 10.0 * rng.normal_vector(12), 0.2);
    SpectralDetectionScore det(model, q16, sigmas);
    LinearGaussianScore lin(h, rng.normal_vector(12), 0.2, Eigen::VectorXd::Zero(6), Eigen::VectorXd::Ones(6), sigmas);
    ComplexMatrix y(3, 2), p(2, 2);
    for (int i = 0; i < y.size(); ++i) y.data()[i] = cd(rng.normal(), rng.normal());
    for (int i = 0; i < p.size(); ++i) p.data()[i] = cd(rng.normal(), rng.normal());
    ChannelEstimationScore est(y, p, 0.1, 0.5, sigmas, 2);
    QuadraticScore quad(Eigen::Matrix2d(Eigen::Vector2d(1, 4).asDiagonal()));

    const ScoreModel* models[] = {&det, &lin, &est, &quad};
    for (const ScoreModel* m : models) {
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::VectorXd x = std::pow(10.0, 3.0 * rng.uniform() - 1.0) * rng.normal_vector(m->dim());
            for (std::size_t l = 0; l < sigmas.size(); ++l) {
                if (m == &det && sigmas[l] == 0.0) continue;  // detection prior needs sigma_l > 0
                CHECK(m->score(x, l).allFinite());
            }
        }
    }
}
