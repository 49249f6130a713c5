#include "langevin/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace langevin {

namespace {

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

Constellation square_qam(std::string name, int per_dim) {
    // Levels +-1, +-3, ... scaled so the complex symbol has unit energy.
    Eigen::VectorXd levels(per_dim);
    for (int i = 0; i < per_dim; ++i) levels[i] = -(per_dim - 1) + 2.0 * i;
    const double mean_sq = levels.squaredNorm() / per_dim;
    Constellation c;
    c.name = std::move(name);
    c.points = levels / std::sqrt(2.0 * mean_sq);
    c.energy = 2.0 * c.points.squaredNorm() / per_dim;
    return c;
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::VectorXd> complex_to_real(const ComplexMatrix& hbar,
                                                            const ComplexVector& ybar) {
    if (hbar.rows() != ybar.size()) {
        throw DimensionError("complex_to_real: channel has " + std::to_string(hbar.rows()) +
                             " rows but observation has " + std::to_string(ybar.size()) + " entries");
    }
    return {complex_to_real(hbar), complex_to_real(ybar)};
}

Eigen::MatrixXd complex_to_real(const ComplexMatrix& hbar) {
    const Eigen::Index r = hbar.rows();
    const Eigen::Index c = hbar.cols();
    Eigen::MatrixXd h(2 * r, 2 * c);
    h.topLeftCorner(r, c) = hbar.real();
    h.topRightCorner(r, c) = -hbar.imag();
    h.bottomLeftCorner(r, c) = hbar.imag();
    h.bottomRightCorner(r, c) = hbar.real();
    return h;
}

Eigen::VectorXd complex_to_real(const ComplexVector& xbar) {
    Eigen::VectorXd x(2 * xbar.size());
    x << xbar.real(), xbar.imag();
    return x;
}

ComplexMatrix real_to_complex(const Eigen::MatrixXd& h) {
    if (h.rows() % 2 != 0 || h.cols() % 2 != 0) {
        throw DimensionError("real_to_complex: block matrix must have even dimensions");
    }
    const Eigen::Index r = h.rows() / 2;
    const Eigen::Index c = h.cols() / 2;
    ComplexMatrix out(r, c);
    out.real() = h.topLeftCorner(r, c);
    out.imag() = h.bottomLeftCorner(r, c);
    return out;
}

ComplexVector real_to_complex(const Eigen::VectorXd& x) {
    if (x.size() % 2 != 0) throw DimensionError("real_to_complex: vector must have even length");
    const Eigen::Index n = x.size() / 2;
    ComplexVector out(n);
    out.real() = x.head(n);
    out.imag() = x.tail(n);
    return out;
}

Constellation make_constellation(const std::string& name) {
    const std::string key = upper(name);
    if (key == "QPSK" || key == "QAM4") return square_qam("QPSK", 2);
    if (key == "QAM16" || key == "16QAM") return square_qam("QAM16", 4);
    if (key == "QAM64" || key == "64QAM") return square_qam("QAM64", 8);
    throw std::invalid_argument("unknown constellation '" + name + "' (expected QPSK, QAM16 or QAM64)");
}

void ChannelSpec::validate() const {
    if (n_r < 1 || n_u < 1) throw std::invalid_argument("channel: n_r and n_u must be >= 1");
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("channel: rho must lie in [0, 1)");
}

ChannelModel parse_channel_model(const std::string& name) {
    const std::string key = upper(name);
    if (key == "IID-RAYLEIGH" || key == "RAYLEIGH" || key == "IID") return ChannelModel::IidRayleigh;
    if (key == "KRONECKER-EXPONENTIAL" || key == "KRONECKER") return ChannelModel::KroneckerExponential;
    throw std::invalid_argument("unknown channel model '" + name + "'");
}

std::string to_string(ChannelModel model) {
    return model == ChannelModel::IidRayleigh ? "iid-rayleigh" : "kronecker-exponential";
}

Eigen::MatrixXd exponential_correlation(int n, double rho) {
    Eigen::MatrixXd r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r(i, j) = std::pow(rho, std::abs(i - j));
    return r;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& r) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
    Eigen::VectorXd lambda = eig.eigenvalues();
    const double floor = 1e-12 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) lambda[i] = lambda[i] < floor ? 0.0 : std::sqrt(lambda[i]);
    return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

ComplexMatrix sample_channel(const ChannelSpec& spec, Rng& rng) {
    spec.validate();
    const double scale = std::sqrt(0.5);
    ComplexMatrix he(spec.n_r, spec.n_u);
    for (int j = 0; j < spec.n_u; ++j)
        for (int i = 0; i < spec.n_r; ++i) {
            const double re = rng.normal();
            const double im = rng.normal();
            he(i, j) = {scale * re, scale * im};
        }
    if (spec.model == ChannelModel::IidRayleigh || spec.rho == 0.0) return he;
    const Eigen::MatrixXd rr = psd_sqrt(exponential_correlation(spec.n_r, spec.rho));
    const Eigen::MatrixXd ru = psd_sqrt(exponential_correlation(spec.n_u, spec.rho));
    return rr.cast<std::complex<double>>() * he * ru.cast<std::complex<double>>();
}

double sigma0_from_snr(double snr_linear, const ChannelSpec& spec, const Constellation& constellation) {
    if (!(snr_linear > 0.0)) throw std::invalid_argument("sigma0_from_snr: snr must be positive");
    // E||Hx||^2 = n_r n_u E_s ; E||z||^2 = n_r sigma0^2.
    const double signal = static_cast<double>(spec.n_r) * spec.n_u * constellation.energy;
    return std::sqrt(signal / (spec.n_r * snr_linear));
}

ChannelSvd compute_svd(const Eigen::MatrixXd& h) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

ForwardModel::ForwardModel(Eigen::MatrixXd h, Eigen::VectorXd y, double sigma0)
    : ForwardModel(std::make_shared<const Eigen::MatrixXd>(std::move(h)), nullptr, std::move(y), sigma0) {}

ForwardModel::ForwardModel(std::shared_ptr<const Eigen::MatrixXd> h, std::shared_ptr<const ChannelSvd> svd,
                           Eigen::VectorXd y, double sigma0)
    : h_(std::move(h)), svd_(std::move(svd)), y_(std::move(y)), sigma0_(sigma0) {
    if (h_->rows() < 1 || h_->cols() < 1) throw DimensionError("ForwardModel: empty channel");
    if (y_.size() != h_->rows()) {
        throw DimensionError("ForwardModel: observation length " + std::to_string(y_.size()) +
                             " does not match channel rows " + std::to_string(h_->rows()));
    }
    if (!(sigma0_ >= 0.0) || !std::isfinite(sigma0_)) throw std::invalid_argument("ForwardModel: sigma0 must be >= 0");
    if (!h_->allFinite()) throw std::invalid_argument("ForwardModel: channel has non-finite entries");
    if (!svd_) svd_ = std::make_shared<const ChannelSvd>(compute_svd(*h_));
}

ForwardModel ForwardModel::with_observation(Eigen::VectorXd y) const { return {h_, svd_, std::move(y), sigma0_}; }

Eigen::VectorXd apply_forward(const ForwardModel& model, const Eigen::VectorXd& x, Rng& rng) {
    if (x.size() != model.cols()) {
        throw DimensionError("apply_forward: signal length " + std::to_string(x.size()) + " does not match " +
                             std::to_string(model.cols()) + " channel columns");
    }
    Eigen::VectorXd y = model.h() * x;
    if (model.sigma0() > 0.0)
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += model.sigma0() * rng.normal();
    return y;
}

Eigen::VectorXd random_symbols(int n_u, const Constellation& constellation, Rng& rng) {
    const auto k = static_cast<std::size_t>(constellation.points.size());
    Eigen::VectorXd x(2 * n_u);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = constellation.points[static_cast<Eigen::Index>(rng.index(k))];
    return x;
}

}  // namespace langevin
