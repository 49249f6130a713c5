#include "langevin/score.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace langevin {

namespace {

double sigma_at(const std::vector<double>& sigmas, std::size_t level) {
    if (level >= sigmas.size()) throw std::out_of_range("score: level index out of range");
    return sigmas[level];
}

}  // namespace

SpectralCoords to_spectral(const ForwardModel& model, const Eigen::VectorXd& x) {
    return {model.svd().v.transpose() * x, model.svd().u.transpose() * model.y()};
}

Eigen::VectorXd spectral_likelihood_score(const Eigen::VectorXd& chi, const Eigen::VectorXd& eta,
                                          const Eigen::VectorXd& s, double sigma0, double sigma_l) {
    const Eigen::Index rank = std::min<Eigen::Index>(s.size(), std::min(chi.size(), eta.size()));
    const double var0 = sigma0 * sigma0;
    const double var_l = sigma_l * sigma_l;
    const double threshold = 1e-12 * std::max(var0, 1e-30);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(chi.size());
    for (Eigen::Index j = 0; j < rank; ++j) {
        const double d = std::abs(var0 - var_l * s[j] * s[j]);
        if (d < threshold) continue;
        out[j] = s[j] * (eta[j] - s[j] * chi[j]) / d;
    }
    return out;
}

double gmm_conditional_expectation(double xtilde, double sigma_l, const Eigen::VectorXd& points) {
    const double inv = 1.0 / (2.0 * sigma_l * sigma_l);
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < points.size(); ++k) {
        const double d = xtilde - points[k];
        best = std::max(best, -d * d * inv);
    }
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index k = 0; k < points.size(); ++k) {
        const double d = xtilde - points[k];
        const double w = std::exp(-d * d * inv - best);
        num += w * points[k];
        den += w;
    }
    return num / den;
}

Eigen::VectorXd tweedie_prior_score(const Eigen::VectorXd& xtilde, double sigma_l, const Constellation& c) {
    if (!(sigma_l > 0.0)) throw std::invalid_argument("tweedie_prior_score: sigma_l must be > 0");
    const double inv_var = 1.0 / (sigma_l * sigma_l);
    Eigen::VectorXd out(xtilde.size());
    for (Eigen::Index j = 0; j < xtilde.size(); ++j)
        out[j] = (gmm_conditional_expectation(xtilde[j], sigma_l, c.points) - xtilde[j]) * inv_var;
    return out;
}

Eigen::VectorXd spectral_prior_score(const Eigen::VectorXd& chi, const Eigen::MatrixXd& v, double sigma_l,
                                     const Constellation& c) {
    return v.transpose() * tweedie_prior_score(v * chi, sigma_l, c);
}

ComplexMatrix annealed_channel_likelihood_score(const ComplexMatrix& h_tilde, const ComplexMatrix& y,
                                                const ComplexMatrix& p, double sigma0, double gamma_l) {
    if (h_tilde.cols() != p.rows() || y.rows() != h_tilde.rows() || y.cols() != p.cols())
        throw DimensionError("annealed_channel_likelihood_score: inconsistent dimensions");
    return (y - h_tilde * p) * p.adjoint() / (sigma0 * sigma0 + gamma_l * gamma_l);
}

Eigen::VectorXd gaussian_prior_score(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                                     const Eigen::VectorXd& cov_diag) {
    if (x.size() != mean.size() || x.size() != cov_diag.size())
        throw DimensionError("gaussian_prior_score: inconsistent dimensions");
    return -((x - mean).array() / cov_diag.array()).matrix();
}

Eigen::VectorXd posterior_score(const Eigen::VectorXd& likelihood, const Eigen::VectorXd& prior) {
    if (likelihood.size() != prior.size()) throw DimensionError("posterior_score: dimension mismatch");
    return likelihood + prior;
}

Eigen::VectorXd pack_complex(const ComplexMatrix& m) {
    const Eigen::Index n = m.size();
    Eigen::VectorXd out(2 * n);
    out.head(n) = m.real().reshaped();
    out.tail(n) = m.imag().reshaped();
    return out;
}

ComplexMatrix unpack_complex(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != 2 * rows * cols) throw DimensionError("unpack_complex: wrong vector length");
    const Eigen::Index n = rows * cols;
    ComplexMatrix out(rows, cols);
    out.real() = v.head(n).reshaped(rows, cols);
    out.imag() = v.tail(n).reshaped(rows, cols);
    return out;
}

SpectralDetectionScore::SpectralDetectionScore(ForwardModel model, Constellation constellation,
                                               std::vector<double> sigmas)
    : model_(std::move(model)), constellation_(std::move(constellation)), sigmas_(std::move(sigmas)) {
    eta_ = model_.svd().u.transpose() * model_.y();
}

Eigen::VectorXd SpectralDetectionScore::score(const Eigen::VectorXd& chi, std::size_t level) const {
    const double sigma_l = sigma_at(sigmas_, level);
    const auto& svd = model_.svd();
    Eigen::VectorXd out = spectral_likelihood_score(chi, eta_, svd.s, model_.sigma0(), sigma_l);
    out.noalias() += svd.v.transpose() * tweedie_prior_score(svd.v * chi, sigma_l, constellation_);
    return out;
}

LinearGaussianScore::LinearGaussianScore(Eigen::MatrixXd h, Eigen::VectorXd y, double sigma0,
                                         Eigen::VectorXd prior_mean, Eigen::VectorXd prior_cov,
                                         std::vector<double> sigmas)
    : h_(std::move(h)),
      y_(std::move(y)),
      sigma0_(sigma0),
      mean_(std::move(prior_mean)),
      cov_(std::move(prior_cov)),
      sigmas_(std::move(sigmas)) {
    if (y_.size() != h_.rows() || mean_.size() != h_.cols() || cov_.size() != h_.cols())
        throw DimensionError("LinearGaussianScore: inconsistent dimensions");
    if (!(cov_.array() > 0.0).all()) throw std::invalid_argument("LinearGaussianScore: prior covariance must be > 0");
}

Eigen::VectorXd LinearGaussianScore::score(const Eigen::VectorXd& x, std::size_t level) const {
    const double sigma_l = sigma_at(sigmas_, level);
    const double var_l = sigma_l * sigma_l;
    Eigen::VectorXd lik = h_.transpose() * (y_ - h_ * x) / (sigma0_ * sigma0_ + var_l);
    Eigen::VectorXd cov = cov_.array() + var_l;
    return posterior_score(lik, gaussian_prior_score(x, mean_, cov));
}

Eigen::MatrixXd LinearGaussianScore::posterior_covariance() const {
    Eigen::MatrixXd precision = h_.transpose() * h_ / (sigma0_ * sigma0_);
    precision.diagonal() += cov_.cwiseInverse();
    return precision.inverse();
}

Eigen::VectorXd LinearGaussianScore::posterior_mean() const {
    const Eigen::VectorXd rhs = h_.transpose() * y_ / (sigma0_ * sigma0_) + mean_.cwiseQuotient(cov_);
    return posterior_covariance() * rhs;
}

ChannelEstimationScore::ChannelEstimationScore(ComplexMatrix y, ComplexMatrix pilots, double sigma0,
                                               double prior_var, std::vector<double> sigmas, Eigen::Index n_u)
    : y_(std::move(y)),
      pilots_(std::move(pilots)),
      sigma0_(sigma0),
      prior_var_(prior_var),
      sigmas_(std::move(sigmas)),
      n_u_(n_u) {
    if (pilots_.rows() != n_u_ || pilots_.cols() != y_.cols())
        throw DimensionError("ChannelEstimationScore: pilot matrix does not match observations");
    if (!(prior_var_ > 0.0)) throw std::invalid_argument("ChannelEstimationScore: prior variance must be > 0");
}

Eigen::VectorXd ChannelEstimationScore::score(const Eigen::VectorXd& state, std::size_t level) const {
    const double sigma_l = sigma_at(sigmas_, level);
    const ComplexMatrix h = unpack_complex(state, y_.rows(), n_u_);
    Eigen::VectorXd lik = pack_complex(annealed_channel_likelihood_score(h, y_, pilots_, sigma0_, sigma_l));
    return lik - state / (prior_var_ + sigma_l * sigma_l);
}

}  // namespace langevin
