#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "langevin/rng.hpp"
#include "langevin/sampler.hpp"
#include "langevin/schedule.hpp"

namespace langevin {

/// One line of a verification report.
struct CheckRow {
    std::string test;
    double statistic = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// test,statistic,target,tolerance,pass with 17 significant digits.
void write_verification_csv(const std::vector<CheckRow>& rows, const std::string& path);
std::string verification_csv(const std::vector<CheckRow>& rows);

struct MomentReport {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd cov_stderr;  // batch-means standard error per entry
    Eigen::MatrixXd target;
    long n_samples = 0;
    double max_rel_err_vs_target = 0.0;  // max |cov - target| / max |target|
    double frobenius_rel_err = 0.0;      // ||cov - target||_F / ||target||_F
    double tolerance = 0.0;
    bool pass = false;
};

/// Fixed-level dynamics on a quadratic potential U(x) = x^T Lambda x / 2.
struct StationaryConfig {
    DynamicsParams params;
    std::string scheme = "BAOAB";
    Eigen::VectorXd c;  // pre-conditioner diagonal
    Eigen::VectorXd m;  // mass diagonal
    double tau = 1.0;
    double eps = 0.01;
    long n_steps = 1250000;  // including burn-in
    long burn_in = 250000;
    long batches = 100;
    double tolerance = 0.05;
};

struct StationaryReport {
    MomentReport x;  // target tau Lambda^{-1}
    MomentReport v;  // target tau M (orders 2, 3)
    std::optional<MomentReport> z;  // target tau M (order 3)
};

/// Runs one chain at a single level and compares post-burn-in moments with the
/// Gibbs targets. Throws DivergenceError.
StationaryReport sample_stationary(const StationaryConfig& config, const Eigen::MatrixXd& lambda, Rng& rng);

/// dX = -(D + Q) grad H dt + sqrt(2 tau D) dW.
struct GenericForm {
    Eigen::MatrixXd d;
    Eigen::MatrixXd q;
    Eigen::MatrixXd d_sqrt;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_h;

    // D symmetric PSD, Q antisymmetric to 1e-12.
    void validate() const;
};

/// D = blkdiag(0, gamma M), Q = [[0, -C], [C, 0]] with H = U(x) + v^T M^{-1} v / 2.
GenericForm generic_form_order2(const Eigen::VectorXd& c, const Eigen::VectorXd& m, double gamma,
                                const Eigen::MatrixXd& lambda);

/// D = blkdiag(0, 0, alpha M), Q = [[0, -C, 0], [C, 0, -lambda M], [0, lambda M, 0]]
/// with H = U(x) + v^T M^{-1} v / 2 + z^T M^{-1} z / 2.
GenericForm generic_form_order3(const Eigen::VectorXd& c, const Eigen::VectorXd& m, double lambda_prony,
                                double alpha, const Eigen::MatrixXd& lambda);

/// One Euler-Maruyama step of the generic form.
Eigen::VectorXd generic_form_step(const GenericForm& form, const Eigen::VectorXd& state, double dt, double tau,
                                  Rng& rng);

// [x], [x; v] or [x; v; z].
Eigen::VectorXd stack_state(const SamplerState& s, int order);
SamplerState unstack_state(const Eigen::VectorXd& state, int order);

struct EquivalencePoint {
    double eps = 0.0;
    double mean_diff = 0.0;  // ||E[scheme step] - E[generic step]||
};

struct EquivalenceReport {
    std::vector<EquivalencePoint> points;
    double slope = 0.0;  // least-squares slope of log mean_diff against log eps
    double min_slope = 1.9;
    bool pass = false;
};

/// Compares the one-step mean of a composed splitting step with the generic
/// form over `replicates` antithetic noise pairs from the same start state.
EquivalenceReport generic_form_equivalence(const StationaryConfig& config, const Eigen::MatrixXd& lambda,
                                           const Eigen::VectorXd& start, const std::vector<double>& eps_values,
                                           long replicates, Rng& rng);

struct FdtReport {
    std::vector<CheckRow> checks;
    bool pass() const;
};

/// OU sub-step checks. Order 2: n one-step draws from v = 0 against
/// tau (1 - e^{-2 gamma dt}) M within 3%. Order 3: n independent z chains with
/// v = 0 relaxed until the variance deficit is below 1e-4; stationary variance against tau M within 3% and
/// lag autocorrelations at 1, 5 and 10 steps against e^{-alpha k dt} within 5%.
FdtReport fdt_check(const DynamicsParams& params, const Eigen::VectorXd& m, double tau, double dt, long n, Rng& rng);

struct ChannelToyConfig {
    int n_r = 16;
    int n_u = 32;
    double alpha_p = 0.6;
    double snr_db = 10.0;
    double prior_var = 0.5;  // per real dimension: CN(0, 1) entries
    ScheduleConfig schedule;
    DynamicsParams params;
    std::string scheme = "BAOAB";
};

struct ChannelToyResult {
    double nmse_db = 0.0;       // sampler estimate, +inf when diverged
    double mmse_nmse_db = 0.0;  // closed-form posterior mean on the same instance
    bool diverged = false;
    std::string diagnostic;
    int n_pilots = 0;
};

/// Draws H ~ CN(0, 2 prior_var), DFT pilots with unit-modulus entries, Y = HP + Z at the
/// requested SNR, runs the annealed sampler with the annealed likelihood and
/// Gaussian prior scores and returns both NMSE values in dB.
ChannelToyResult gaussian_channel_toy(const ChannelToyConfig& config, Rng& rng);

/// Posterior mean of a linear-Gaussian problem estimated from independent
/// annealed runs, against the closed form.
struct PosteriorMeanReport {
    Eigen::VectorXd sample_mean;
    Eigen::VectorXd exact_mean;
    Eigen::VectorXd standard_error;
    double max_z = 0.0;  // max |sample - exact| / stderr
    long runs = 0;
    bool pass = false;
};

PosteriorMeanReport gaussian_posterior_check(const LinearGaussianScore& score, const AnnealSchedule& schedule,
                                             const DynamicsParams& params, const SchemeSpec& scheme, long runs,
                                             std::uint64_t seed, unsigned threads = 1, double max_z = 3.0);

}  // namespace langevin
