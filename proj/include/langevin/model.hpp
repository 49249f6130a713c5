#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "langevin/rng.hpp"

namespace langevin {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// [[Re H, -Im H], [Im H, Re H]] and [Re y; Im y].
std::pair<Eigen::MatrixXd, Eigen::VectorXd> complex_to_real(const ComplexMatrix& hbar,
                                                            const ComplexVector& ybar);
Eigen::MatrixXd complex_to_real(const ComplexMatrix& hbar);
Eigen::VectorXd complex_to_real(const ComplexVector& xbar);

// Inverses of the above. The matrix overload reads the left block column.
ComplexMatrix real_to_complex(const Eigen::MatrixXd& h);
ComplexVector real_to_complex(const Eigen::VectorXd& x);

/// Per-real-dimension symbol alphabet of a square QAM constellation.
///
/// `points` are sorted ascending; the complex alphabet is points x points.
/// `energy` is the average energy of the complex symbol, which is 1 for all
/// built-in alphabets.
struct Constellation {
    std::string name;
    Eigen::VectorXd points;
    double energy = 1.0;

    std::size_t order() const { return static_cast<std::size_t>(points.size() * points.size()); }
};

/// QPSK, QAM16 or QAM64 (case-insensitive). Throws std::invalid_argument.
Constellation make_constellation(const std::string& name);

enum class ChannelModel { IidRayleigh, KroneckerExponential };

struct ChannelSpec {
    int n_r = 1;
    int n_u = 1;
    double rho = 0.0;
    ChannelModel model = ChannelModel::IidRayleigh;

    void validate() const;
};

ChannelModel parse_channel_model(const std::string& name);
std::string to_string(ChannelModel model);

/// [R]_ij = rho^|i-j|.
Eigen::MatrixXd exponential_correlation(int n, double rho);

/// Symmetric PSD square root via eigendecomposition; eigenvalues below
/// 1e-12 (relative to the largest) are clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& r);

/// H = R_r^{1/2} H_e R_u^{1/2}, H_e ~ CN(0, 1) i.i.d.
ComplexMatrix sample_channel(const ChannelSpec& spec, Rng& rng);

/// Complex noise std sigma0 such that E||Hx||^2 / E||z||^2 = snr_linear with
/// E|H_ij|^2 = 1, i.e. sigma0^2 = n_u * energy / snr. Divide by sqrt(2) for the
/// per-real-dimension std used by ForwardModel.
double sigma0_from_snr(double snr_linear, const ChannelSpec& spec, const Constellation& constellation);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct ChannelSvd {
    Eigen::MatrixXd u;  // rows x rows
    Eigen::VectorXd s;  // min(rows, cols), nonincreasing
    Eigen::MatrixXd v;  // cols x cols
};

/// Real-valued y = Hx + z, z ~ N(0, sigma0^2 I), with the SVD of H computed
/// once and shared between copies that only differ in the observation.
class ForwardModel {
public:
    ForwardModel(Eigen::MatrixXd h, Eigen::VectorXd y, double sigma0);

    // New observation on the same channel; the SVD is reused.
    ForwardModel with_observation(Eigen::VectorXd y) const;

    const Eigen::MatrixXd& h() const { return *h_; }
    const Eigen::VectorXd& y() const { return y_; }
    double sigma0() const { return sigma0_; }
    const ChannelSvd& svd() const { return *svd_; }

    Eigen::Index rows() const { return h_->rows(); }
    Eigen::Index cols() const { return h_->cols(); }

    double residual(const Eigen::VectorXd& x) const { return (y_ - h() * x).norm(); }

private:
    ForwardModel(std::shared_ptr<const Eigen::MatrixXd> h, std::shared_ptr<const ChannelSvd> svd,
                 Eigen::VectorXd y, double sigma0);

    std::shared_ptr<const Eigen::MatrixXd> h_;
    std::shared_ptr<const ChannelSvd> svd_;
    Eigen::VectorXd y_;
    double sigma0_;
};

ChannelSvd compute_svd(const Eigen::MatrixXd& h);

/// y = Hx + z with z ~ N(0, sigma0^2 I) drawn from rng.
Eigen::VectorXd apply_forward(const ForwardModel& model, const Eigen::VectorXd& x, Rng& rng);

/// Uniformly random real-valued symbol vector of length 2 n_u.
Eigen::VectorXd random_symbols(int n_u, const Constellation& constellation, Rng& rng);

}  // namespace langevin
