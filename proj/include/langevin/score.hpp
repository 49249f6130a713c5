#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "langevin/model.hpp"

namespace langevin {

/// Annealed posterior score keyed on the noise-level index.
///
/// Implementations must be deterministic in (state, level) and safe to call
/// concurrently; the samplers rely on both.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    virtual Eigen::Index dim() const = 0;
    virtual Eigen::VectorXd score(const Eigen::VectorXd& state, std::size_t level) const = 0;
};

struct SpectralCoords {
    Eigen::VectorXd chi;  // V^T x
    Eigen::VectorXd eta;  // U^T y
};

SpectralCoords to_spectral(const ForwardModel& model, const Eigen::VectorXd& x);

/// Sigma^T |sigma0^2 I - sigma_l^2 Sigma Sigma^T|^+ (eta - Sigma chi).
///
/// Diagonal entries below 1e-12 max(sigma0^2, 1e-30) invert to zero.
Eigen::VectorXd spectral_likelihood_score(const Eigen::VectorXd& chi, const Eigen::VectorXd& eta,
                                          const Eigen::VectorXd& s, double sigma0, double sigma_l);

/// E[x | x~] for x uniform over `points` and x~ = x + N(0, sigma_l^2).
double gmm_conditional_expectation(double xtilde, double sigma_l, const Eigen::VectorXd& points);

inline double gmm_conditional_expectation(double xtilde, double sigma_l, const Constellation& c) {
    return gmm_conditional_expectation(xtilde, sigma_l, c.points);
}

/// (E[x | x~] - x~) / sigma_l^2 elementwise.
Eigen::VectorXd tweedie_prior_score(const Eigen::VectorXd& xtilde, double sigma_l, const Constellation& c);

/// V^T tweedie_prior_score(V chi).
Eigen::VectorXd spectral_prior_score(const Eigen::VectorXd& chi, const Eigen::MatrixXd& v, double sigma_l,
                                     const Constellation& c);

/// (Y - H P) P^H / (sigma0^2 + gamma_l^2). `sigma0` is the noise std per real
/// dimension; the result is the gradient of -||Y - HP||_F^2 / (2 (sigma0^2 +
/// gamma_l^2)) with respect to (Re H, Im H), packed as a complex matrix.
ComplexMatrix annealed_channel_likelihood_score(const ComplexMatrix& h_tilde, const ComplexMatrix& y,
                                                const ComplexMatrix& p, double sigma0, double gamma_l);

/// -(x - mean) / cov_diag.
Eigen::VectorXd gaussian_prior_score(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                                     const Eigen::VectorXd& cov_diag);

/// likelihood + prior, with a dimension check.
Eigen::VectorXd posterior_score(const Eigen::VectorXd& likelihood, const Eigen::VectorXd& prior);

// Packing of a complex matrix as [vec(Re); vec(Im)] (column-major vec).
Eigen::VectorXd pack_complex(const ComplexMatrix& m);
ComplexMatrix unpack_complex(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols);

/// Detection posterior in spectral coordinates: state is chi = V^T x~.
class SpectralDetectionScore final : public ScoreModel {
public:
    SpectralDetectionScore(ForwardModel model, Constellation constellation, std::vector<double> sigmas);

    Eigen::Index dim() const override { return model_.cols(); }
    Eigen::VectorXd score(const Eigen::VectorXd& chi, std::size_t level) const override;

    const ForwardModel& model() const { return model_; }
    const Eigen::VectorXd& eta() const { return eta_; }
    // x = V chi.
    Eigen::VectorXd to_signal(const Eigen::VectorXd& chi) const { return model_.svd().v * chi; }

private:
    ForwardModel model_;
    Constellation constellation_;
    std::vector<double> sigmas_;
    Eigen::VectorXd eta_;
};

/// Linear-Gaussian posterior with annealed likelihood
/// H^T (y - Hx) / (sigma0^2 + sigma_l^2) and prior N(mean, cov + sigma_l^2).
class LinearGaussianScore final : public ScoreModel {
public:
    LinearGaussianScore(Eigen::MatrixXd h, Eigen::VectorXd y, double sigma0, Eigen::VectorXd prior_mean,
                        Eigen::VectorXd prior_cov, std::vector<double> sigmas);

    Eigen::Index dim() const override { return h_.cols(); }
    Eigen::VectorXd score(const Eigen::VectorXd& x, std::size_t level) const override;

    /// Exact posterior mean and covariance at sigma_l = 0.
    Eigen::VectorXd posterior_mean() const;
    Eigen::MatrixXd posterior_covariance() const;

private:
    Eigen::MatrixXd h_;
    Eigen::VectorXd y_;
    double sigma0_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd cov_;
    std::vector<double> sigmas_;
};

/// Channel estimation from pilots: state is pack_complex(H~), likelihood from
/// annealed_channel_likelihood_score with gamma_l = sigma_l and a Gaussian
/// prior with per-real-dimension variance prior_var + sigma_l^2.
class ChannelEstimationScore final : public ScoreModel {
public:
    ChannelEstimationScore(ComplexMatrix y, ComplexMatrix pilots, double sigma0, double prior_var,
                           std::vector<double> sigmas, Eigen::Index n_u);

    Eigen::Index dim() const override { return 2 * y_.rows() * n_u_; }
    Eigen::VectorXd score(const Eigen::VectorXd& state, std::size_t level) const override;

private:
    ComplexMatrix y_;
    ComplexMatrix pilots_;
    double sigma0_;
    double prior_var_;
    std::vector<double> sigmas_;
    Eigen::Index n_u_;
};

/// Score of the quadratic potential U(x) = x^T Lambda x / 2, ignoring the level.
class QuadraticScore final : public ScoreModel {
public:
    explicit QuadraticScore(Eigen::MatrixXd lambda) : lambda_(std::move(lambda)) {}

    Eigen::Index dim() const override { return lambda_.rows(); }
    Eigen::VectorXd score(const Eigen::VectorXd& x, std::size_t) const override { return -lambda_ * x; }

    const Eigen::MatrixXd& lambda() const { return lambda_; }

private:
    Eigen::MatrixXd lambda_;
};

}  // namespace langevin
