#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace langevin {

class DegenerateNoiseError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Friction and Prony-mode parameters of the dynamics.
struct DynamicsParams {
    int order = 2;        // 1 overdamped, 2 underdamped, 3 third order
    double gamma = 1.0;   // friction, order 2 (also sets the spectral mass)
    double lambda = 1.0;  // Prony coupling, order 3
    double alpha = 1.2;   // Prony decay, order 3

    void validate() const;
};

/// Per-level parameters of an annealed run. All matrices are diagonal and
/// stored as vectors.
struct AnnealSchedule {
    std::vector<double> sigmas;             // L + 1 entries, last is 0
    std::vector<double> epsilons;           // L
    std::vector<Eigen::VectorXd> precond;   // L diagonals
    std::vector<Eigen::VectorXd> mass;      // L diagonals
    double tau = 1.0;
    int t_inner = 1;
    std::optional<long> max_total_iterations;  // early stop

    std::size_t levels() const { return epsilons.size(); }
    Eigen::Index dim() const { return precond.empty() ? 0 : precond.front().size(); }

    // Throws std::invalid_argument if any type invariant fails.
    void validate() const;
};

/// sigma_l = sigma1 (sigmaL / sigma1)^((l-1)/(L-1)), l = 1..L, followed by 0.
std::vector<double> geometric_sigmas(double sigma1, double sigmaL, int levels);

/// eps0 / sigma_L^2 at every level (detection rule).
std::vector<double> detection_step_sizes(double eps0, const std::vector<double>& sigmas);

/// eps0 sigma_l^2 / sigma_L^2 (estimation rule).
std::vector<double> estimation_step_sizes(double eps0, const std::vector<double>& sigmas);

/// Diagonal spectral pre-conditioner for one noise level.
///
/// Singular values are zero-padded up to `dim`. Entry j is
/// sigma_l^2 (1 - sigma_l^2 s_j^2 / sigma0^2) when sigma_l s_j <= sigma0 and
/// sigma_l^2 - sigma0^2 / s_j^2 otherwise, floored at 1e-12 sigma_l^2.
/// Throws DegenerateNoiseError when sigma0 = 0 would need the first branch.
Eigen::VectorXd spectral_preconditioner(double sigma_l, double sigma0, const Eigen::VectorXd& s, Eigen::Index dim);

/// M = (gamma^2 / 4) C^{-1}.
Eigen::VectorXd mass_from_preconditioner(const Eigen::VectorXd& c, double gamma);

/// M = (4 / gamma^2) C, so that C M^{-1} = (gamma^2 / 4) I. With a score whose
/// C-scaled stiffness is near one this puts every coordinate near critical damping.
Eigen::VectorXd critical_mass(const Eigen::VectorXd& c, double gamma);

enum class StepRule { Detection, Estimation };
enum class PrecondMode { Spectral, Identity };

struct MassMode {
    enum class Kind { Spectral, Critical, Scalar } kind = Kind::Spectral;
    double scalar = 1.0;  // Kind::Scalar only

    static MassMode parse(const std::string& text);  // "spectral", "critical" or "scalar:<value>"
    std::string to_string() const;
};

PrecondMode parse_precond_mode(const std::string& text);
StepRule parse_step_rule(const std::string& text);

struct ScheduleConfig {
    int levels = 5;
    double sigma1 = 0.4;
    double sigmaL = 0.02;
    double eps0 = 6e-4;
    int t_inner = 30;
    double tau = 0.01;
    StepRule step_rule = StepRule::Detection;
    PrecondMode precond = PrecondMode::Spectral;
    MassMode mass{};
    std::optional<long> max_total_iterations;
};

/// Builds the per-level arrays. `singular_values` and `sigma0` are only used
/// by the spectral pre-conditioner; pass an empty vector for identity mode.
AnnealSchedule build_schedule(const ScheduleConfig& config, const DynamicsParams& params, Eigen::Index dim,
                              const Eigen::VectorXd& singular_values, double sigma0);

}  // namespace langevin
