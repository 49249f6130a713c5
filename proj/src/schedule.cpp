#include "langevin/schedule.hpp"

#include <cmath>
#include <sstream>

namespace langevin {

void DynamicsParams::validate() const {
    if (order < 1 || order > 3) throw std::invalid_argument("order must be 1, 2 or 3");
    if (order == 2 && !(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0 for order 2");
    if (order == 3 && !(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0 for order 3");
}

void AnnealSchedule::validate() const {
    const std::size_t l = epsilons.size();
    if (l == 0) throw std::invalid_argument("schedule: no levels");
    if (sigmas.size() != l + 1 || precond.size() != l || mass.size() != l)
        throw std::invalid_argument("schedule: inconsistent array lengths");
    if (sigmas.back() != 0.0) throw std::invalid_argument("schedule: final sigma must be 0");
    for (std::size_t i = 0; i < l; ++i) {
        if (!(sigmas[i] > sigmas[i + 1])) throw std::invalid_argument("schedule: sigmas must strictly decrease");
        if (!(epsilons[i] > 0.0)) throw std::invalid_argument("schedule: step sizes must be positive");
        if (precond[i].size() != precond.front().size() || mass[i].size() != precond.front().size())
            throw std::invalid_argument("schedule: inconsistent dimensions");
        if (!(precond[i].array() > 0.0).all()) throw std::invalid_argument("schedule: pre-conditioner must be > 0");
        if (!(mass[i].array() > 0.0).all()) throw std::invalid_argument("schedule: mass must be > 0");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("schedule: tau must be > 0");
    if (t_inner < 0) throw std::invalid_argument("schedule: t_inner must be >= 0");
}

std::vector<double> geometric_sigmas(double sigma1, double sigmaL, int levels) {
    if (levels < 1) throw std::invalid_argument("geometric_sigmas: L must be >= 1");
    if (levels == 1) {
        if (!(sigma1 > 0.0)) throw std::invalid_argument("geometric_sigmas: sigma1 must be > 0");
        return {sigma1, 0.0};
    }
    if (!(sigma1 > sigmaL && sigmaL > 0.0))
        throw std::invalid_argument("geometric_sigmas: need sigma1 > sigmaL > 0");
    std::vector<double> out(levels + 1);
    const double ratio = sigmaL / sigma1;
    for (int l = 0; l < levels; ++l) out[l] = sigma1 * std::pow(ratio, static_cast<double>(l) / (levels - 1));
    out[levels - 1] = sigmaL;
    out[levels] = 0.0;
    return out;
}

std::vector<double> detection_step_sizes(double eps0, const std::vector<double>& sigmas) {
    if (!(eps0 > 0.0)) throw std::invalid_argument("step sizes: eps0 must be > 0");
    if (sigmas.size() < 2) throw std::invalid_argument("step sizes: empty schedule");
    const double last = sigmas[sigmas.size() - 2];
    return std::vector<double>(sigmas.size() - 1, eps0 / (last * last));
}

std::vector<double> estimation_step_sizes(double eps0, const std::vector<double>& sigmas) {
    if (!(eps0 > 0.0)) throw std::invalid_argument("step sizes: eps0 must be > 0");
    if (sigmas.size() < 2) throw std::invalid_argument("step sizes: empty schedule");
    const double last = sigmas[sigmas.size() - 2];
    std::vector<double> out(sigmas.size() - 1);
    for (std::size_t l = 0; l < out.size(); ++l) out[l] = eps0 * (sigmas[l] * sigmas[l]) / (last * last);
    return out;
}

Eigen::VectorXd spectral_preconditioner(double sigma_l, double sigma0, const Eigen::VectorXd& s, Eigen::Index dim) {
    if (!(sigma_l > 0.0)) throw std::invalid_argument("spectral_preconditioner: sigma_l must be > 0");
    if (!(sigma0 >= 0.0)) throw std::invalid_argument("spectral_preconditioner: sigma0 must be >= 0");
    const double var_l = sigma_l * sigma_l;
    const double var0 = sigma0 * sigma0;
    const double floor = 1e-12 * var_l;
    Eigen::VectorXd c(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        const double sj = j < s.size() ? s[j] : 0.0;
        double value = 0.0;
        if (sigma_l * sj <= sigma0) {
            if (var0 == 0.0) throw DegenerateNoiseError("spectral_preconditioner: sigma0 = 0 with a zero singular value");
            value = var_l * (1.0 - var_l * sj * sj / var0);
        } else {
            value = var_l - var0 / (sj * sj);
        }
        c[j] = std::max(value, floor);
    }
    return c;
}

Eigen::VectorXd mass_from_preconditioner(const Eigen::VectorXd& c, double gamma) {
    if (!(c.array() > 0.0).all()) throw std::invalid_argument("mass_from_preconditioner: entries must be > 0");
    return (gamma * gamma / 4.0) * c.cwiseInverse();
}

Eigen::VectorXd critical_mass(const Eigen::VectorXd& c, double gamma) {
    if (!(c.array() > 0.0).all()) throw std::invalid_argument("critical_mass: entries must be > 0");
    return (4.0 / (gamma * gamma)) * c;
}

MassMode MassMode::parse(const std::string& text) {
    if (text == "spectral") return {};
    if (text == "critical") return {MassMode::Kind::Critical, 1.0};
    const std::string prefix = "scalar:";
    if (text.rfind(prefix, 0) == 0) {
        MassMode m;
        m.kind = Kind::Scalar;
        try {
            m.scalar = std::stod(text.substr(prefix.size()));
        } catch (const std::exception&) {
            throw std::invalid_argument("mass_mode: bad scalar in '" + text + "'");
        }
        if (!(m.scalar > 0.0)) throw std::invalid_argument("mass_mode: scalar mass must be > 0");
        return m;
    }
    throw std::invalid_argument("mass_mode must be 'spectral', 'critical' or 'scalar:<value>', got '" + text + "'");
}

std::string MassMode::to_string() const {
    if (kind == Kind::Spectral) return "spectral";
    if (kind == Kind::Critical) return "critical";
    std::ostringstream os;
    os << "scalar:" << scalar;
    return os.str();
}

PrecondMode parse_precond_mode(const std::string& text) {
    if (text == "spectral") return PrecondMode::Spectral;
    if (text == "identity") return PrecondMode::Identity;
    throw std::invalid_argument("precond must be 'spectral' or 'identity', got '" + text + "'");
}

StepRule parse_step_rule(const std::string& text) {
    if (text == "detection") return StepRule::Detection;
    if (text == "estimation") return StepRule::Estimation;
    throw std::invalid_argument("step_rule must be 'detection' or 'estimation', got '" + text + "'");
}

AnnealSchedule build_schedule(const ScheduleConfig& config, const DynamicsParams& params, Eigen::Index dim,
                              const Eigen::VectorXd& singular_values, double sigma0) {
    params.validate();
    if (dim < 1) throw std::invalid_argument("build_schedule: dimension must be >= 1");
    AnnealSchedule out;
    out.sigmas = geometric_sigmas(config.sigma1, config.sigmaL, config.levels);
    out.epsilons = config.step_rule == StepRule::Detection ? detection_step_sizes(config.eps0, out.sigmas)
                                                           : estimation_step_sizes(config.eps0, out.sigmas);
    out.tau = config.tau;
    out.t_inner = config.t_inner;
    out.max_total_iterations = config.max_total_iterations;
    for (std::size_t l = 0; l < out.epsilons.size(); ++l) {
        Eigen::VectorXd c = config.precond == PrecondMode::Spectral
                                ? spectral_preconditioner(out.sigmas[l], sigma0, singular_values, dim)
                                : Eigen::VectorXd::Ones(dim);
        Eigen::VectorXd m;
        switch (config.mass.kind) {
            case MassMode::Kind::Spectral: m = mass_from_preconditioner(c, params.gamma); break;
            case MassMode::Kind::Critical: m = critical_mass(c, params.gamma); break;
            case MassMode::Kind::Scalar: m = Eigen::VectorXd::Constant(dim, config.mass.scalar); break;
        }
        out.precond.push_back(std::move(c));
        out.mass.push_back(std::move(m));
    }
    out.validate();
    return out;
}

}  // namespace langevin
