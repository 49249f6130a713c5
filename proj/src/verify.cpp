#include "langevin/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "langevin/model.hpp"
#include "langevin/parallel.hpp"
#include "langevin/score.hpp"

namespace langevin {

namespace {

// Running first and second moments plus per-batch covariances.
class MomentAccumulator {
public:
    MomentAccumulator(Eigen::Index dim, long n_samples, long batches)
        : sum_(Eigen::VectorXd::Zero(dim)),
          outer_(Eigen::MatrixXd::Zero(dim, dim)),
          batch_sum_(Eigen::VectorXd::Zero(dim)),
          batch_outer_(Eigen::MatrixXd::Zero(dim, dim)),
          batch_size_(std::max(1L, n_samples / std::max(1L, batches))) {}

    void add(const Eigen::VectorXd& x) {
        sum_ += x;
        outer_.noalias() += x * x.transpose();
        batch_sum_ += x;
        batch_outer_.noalias() += x * x.transpose();
        ++n_;
        if (++in_batch_ == batch_size_) {
            const double b = static_cast<double>(batch_size_);
            const Eigen::VectorXd mean = batch_sum_ / b;
            batch_covs_.push_back(batch_outer_ / b - mean * mean.transpose());
            batch_sum_.setZero();
            batch_outer_.setZero();
            in_batch_ = 0;
        }
    }

    MomentReport report(const Eigen::MatrixXd& target, double tolerance) const {
        MomentReport r;
        const double n = static_cast<double>(n_);
        r.n_samples = n_;
        r.mean = sum_ / n;
        r.covariance = outer_ / n - r.mean * r.mean.transpose();
        r.covariance = 0.5 * (r.covariance + r.covariance.transpose()).eval();
        const Eigen::Index d = r.covariance.rows();
        r.cov_stderr = Eigen::MatrixXd::Zero(d, d);
        const auto b = static_cast<double>(batch_covs_.size());
        if (batch_covs_.size() >= 2) {
            Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d);
            for (const auto& c : batch_covs_) mean += c;
            mean /= b;
            Eigen::MatrixXd var = Eigen::MatrixXd::Zero(d, d);
            for (const auto& c : batch_covs_) var.array() += (c - mean).array().square();
            r.cov_stderr = (var.array() / (b - 1.0) / b).sqrt().matrix();
        }
        r.target = target;
        r.frobenius_rel_err = (r.covariance - target).norm() / target.norm();
        r.max_rel_err_vs_target = (r.covariance - target).cwiseAbs().maxCoeff() / target.cwiseAbs().maxCoeff();
        r.tolerance = tolerance;
        r.pass = r.frobenius_rel_err <= tolerance;
        return r;
    }

private:
    Eigen::VectorXd sum_;
    Eigen::MatrixXd outer_;
    Eigen::VectorXd batch_sum_;
    Eigen::MatrixXd batch_outer_;
    std::vector<Eigen::MatrixXd> batch_covs_;
    long batch_size_;
    long in_batch_ = 0;
    long n_ = 0;
};

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

}  // namespace

std::string verification_csv(const std::vector<CheckRow>& rows) {
    std::ostringstream os;
    os << "test,statistic,target,tolerance,pass\n";
    for (const auto& r : rows) {
        os << csv_field(r.test) << ',' << format_double(r.statistic) << ',' << format_double(r.target) << ','
           << format_double(r.tolerance) << ',' << (r.pass ? "true" : "false") << '\n';
    }
    return os.str();
}

void write_verification_csv(const std::vector<CheckRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << verification_csv(rows);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

StationaryReport sample_stationary(const StationaryConfig& config, const Eigen::MatrixXd& lambda, Rng& rng) {
    const Eigen::Index d = lambda.rows();
    if (lambda.cols() != d || config.c.size() != d || config.m.size() != d)
        throw DimensionError("sample_stationary: inconsistent dimensions");
    if (!(config.n_steps > config.burn_in) || config.burn_in < 0)
        throw std::invalid_argument("sample_stationary: need n_steps > burn_in >= 0");
    Eigen::LLT<Eigen::MatrixXd> llt(lambda);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("sample_stationary: Lambda must be SPD");

    const int order = config.params.order;
    const SchemeSpec scheme = compile_scheme(config.scheme, order);
    SchemeStepper stepper(scheme, config.params);
    const QuadraticScore score(lambda);
    LevelView lv{0, config.eps, &config.c, &config.m, config.tau};

    SamplerState s;
    s.x = Eigen::VectorXd::Zero(d);
    s.v = Eigen::VectorXd::Zero(d);
    s.z = Eigen::VectorXd::Zero(d);

    const long kept = config.n_steps - config.burn_in;
    MomentAccumulator ax(d, kept, config.batches), av(d, kept, config.batches), az(d, kept, config.batches);
    for (long k = 0; k < config.n_steps; ++k) {
        stepper.step(s, score, lv, rng);
        if (k < config.burn_in) continue;
        ax.add(s.x);
        if (order >= 2) av.add(s.v);
        if (order == 3) az.add(s.z);
    }
    StationaryReport out;
    const Eigen::MatrixXd mass_target = config.tau * Eigen::MatrixXd(config.m.asDiagonal());
    out.x = ax.report(config.tau * lambda.inverse(), config.tolerance);
    if (order >= 2) out.v = av.report(mass_target, config.tolerance);
    if (order == 3) out.z = az.report(mass_target, config.tolerance);
    return out;
}

void GenericForm::validate() const {
    if (d.rows() != d.cols() || q.rows() != d.rows() || q.cols() != d.cols())
        throw DimensionError("GenericForm: D and Q must be square of equal size");
    if ((q + q.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw std::invalid_argument("GenericForm: Q not antisymmetric");
    if ((d - d.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw std::invalid_argument("GenericForm: D not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d);
    if (eig.eigenvalues().minCoeff() < -1e-12) throw std::invalid_argument("GenericForm: D not PSD");
}

GenericForm generic_form_order2(const Eigen::VectorXd& c, const Eigen::VectorXd& m, double gamma,
                                const Eigen::MatrixXd& lambda) {
    const Eigen::Index n = c.size();
    GenericForm g;
    g.d = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    g.d.bottomRightCorner(n, n) = gamma * Eigen::MatrixXd(m.asDiagonal());
    g.q = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    g.q.topRightCorner(n, n) = -Eigen::MatrixXd(c.asDiagonal());
    g.q.bottomLeftCorner(n, n) = Eigen::MatrixXd(c.asDiagonal());
    g.d_sqrt = psd_sqrt(g.d);
    const Eigen::VectorXd m_inv = m.cwiseInverse();
    g.grad_h = [lambda, m_inv, n](const Eigen::VectorXd& s) {
        Eigen::VectorXd grad(2 * n);
        grad.head(n) = lambda * s.head(n);
        grad.tail(n) = m_inv.cwiseProduct(s.tail(n));
        return grad;
    };
    g.validate();
    return g;
}

GenericForm generic_form_order3(const Eigen::VectorXd& c, const Eigen::VectorXd& m, double lambda_prony,
                                double alpha, const Eigen::MatrixXd& lambda) {
    const Eigen::Index n = c.size();
    const Eigen::MatrixXd mm = m.asDiagonal();
    GenericForm g;
    g.d = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    g.d.bottomRightCorner(n, n) = alpha * mm;
    g.q = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    g.q.block(0, n, n, n) = -Eigen::MatrixXd(c.asDiagonal());
    g.q.block(n, 0, n, n) = Eigen::MatrixXd(c.asDiagonal());
    g.q.block(n, 2 * n, n, n) = -lambda_prony * mm;
    g.q.block(2 * n, n, n, n) = lambda_prony * mm;
    g.d_sqrt = psd_sqrt(g.d);
    const Eigen::VectorXd m_inv = m.cwiseInverse();
    g.grad_h = [lambda, m_inv, n](const Eigen::VectorXd& s) {
        Eigen::VectorXd grad(3 * n);
        grad.head(n) = lambda * s.head(n);
        grad.segment(n, n) = m_inv.cwiseProduct(s.segment(n, n));
        grad.tail(n) = m_inv.cwiseProduct(s.tail(n));
        return grad;
    };
    g.validate();
    return g;
}

Eigen::VectorXd generic_form_step(const GenericForm& form, const Eigen::VectorXd& state, double dt, double tau,
                                  Rng& rng) {
    Eigen::VectorXd next = state - dt * (form.d + form.q) * form.grad_h(state);
    next.noalias() += std::sqrt(2.0 * tau * dt) * (form.d_sqrt * rng.normal_vector(state.size()));
    return next;
}

Eigen::VectorXd stack_state(const SamplerState& s, int order) {
    const Eigen::Index n = s.x.size();
    Eigen::VectorXd out(order * n);
    out.head(n) = s.x;
    if (order >= 2) out.segment(n, n) = s.v;
    if (order == 3) out.tail(n) = s.z;
    return out;
}

SamplerState unstack_state(const Eigen::VectorXd& state, int order) {
    const Eigen::Index n = state.size() / order;
    SamplerState s;
    s.x = state.head(n);
    s.v = order >= 2 ? Eigen::VectorXd(state.segment(n, n)) : Eigen::VectorXd::Zero(n);
    s.z = order == 3 ? Eigen::VectorXd(state.tail(n)) : Eigen::VectorXd::Zero(n);
    return s;
}

EquivalenceReport generic_form_equivalence(const StationaryConfig& config, const Eigen::MatrixXd& lambda,
                                           const Eigen::VectorXd& start, const std::vector<double>& eps_values,
                                           long replicates, Rng& rng) {
    const int order = config.params.order;
    if (order < 2) throw std::invalid_argument("generic_form_equivalence: order 2 or 3 only");
    if (eps_values.size() < 2) throw std::invalid_argument("generic_form_equivalence: need at least two step sizes");
    const GenericForm form =
        order == 2 ? generic_form_order2(config.c, config.m, config.params.gamma, lambda)
                   : generic_form_order3(config.c, config.m, config.params.lambda, config.params.alpha, lambda);
    const SchemeSpec scheme = compile_scheme(config.scheme, order);
    const QuadraticScore score(lambda);

    EquivalenceReport report;
    for (double eps : eps_values) {
        SchemeStepper stepper(scheme, config.params);
        LevelView lv{0, eps, &config.c, &config.m, config.tau};
        Eigen::VectorXd scheme_sum = Eigen::VectorXd::Zero(start.size());
        Eigen::VectorXd generic_sum = Eigen::VectorXd::Zero(start.size());
        for (long r = 0; r < replicates; ++r) {
            Rng a(rng.engine()());
            Rng b = a.antithetic();
            for (Rng* g : {&a, &b}) {
                SamplerState s = unstack_state(start, order);
                stepper.step(s, score, lv, *g);
                scheme_sum += stack_state(s, order);
            }
            Rng e(rng.engine()());
            Rng f = e.antithetic();
            generic_sum += generic_form_step(form, start, eps, config.tau, e);
            generic_sum += generic_form_step(form, start, eps, config.tau, f);
        }
        const double n = 2.0 * static_cast<double>(replicates);
        report.points.push_back({eps, ((scheme_sum - generic_sum) / n).norm()});
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : report.points) {
        const double lx = std::log(p.eps);
        const double ly = std::log(p.mean_diff);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double k = static_cast<double>(report.points.size());
    report.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    report.pass = std::isfinite(report.slope) && report.slope >= report.min_slope;
    return report;
}

bool FdtReport::pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return !checks.empty();
}

namespace {

CheckRow relative_check(std::string name, double statistic, double target, double tolerance) {
    CheckRow row{std::move(name), statistic, target, tolerance, false};
    if (target == 0.0)
        row.pass = std::abs(statistic) <= 1e-15;
    else
        row.pass = std::abs(statistic - target) <= tolerance * std::abs(target);
    return row;
}

}  // namespace

FdtReport fdt_check(const DynamicsParams& params, const Eigen::VectorXd& m, double tau, double dt, long n, Rng& rng) {
    params.validate();
    if (n < 2) throw std::invalid_argument("fdt_check: need n >= 2");
    const Eigen::Index d = m.size();
    FdtReport report;
    std::ostringstream tag;
    tag << std::setprecision(6);
    if (params.order == 2) {
        tag << "fdt_o2[gamma=" << params.gamma << ",tau=" << tau << ",dt=" << dt << "]";
        const double decay = std::exp(-params.gamma * dt);
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
        for (long i = 0; i < n; ++i) {
            SamplerState s{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
            flow_O_order2(s, dt, params.gamma, tau, m, rng);
            sum += s.v;
            sq += s.v.cwiseAbs2();
        }
        for (Eigen::Index j = 0; j < d; ++j) {
            const double mean = sum[j] / n;
            const double var = sq[j] / n - mean * mean;
            report.checks.push_back(relative_check(tag.str() + ".noise_var[" + std::to_string(j) + "]", var,
                                                   tau * (1.0 - decay * decay) * m[j], 0.03));
        }
        SamplerState unit{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d), Eigen::VectorXd::Zero(d)};
        Rng quiet(0);
        flow_O_order2(unit, dt, params.gamma, 0.0, m, quiet);
        report.checks.push_back(relative_check(tag.str() + ".noiseless_decay", unit.v[0], decay, 1e-14));
        return report;
    }
    if (params.order != 3) throw std::invalid_argument("fdt_check: order 2 or 3 only");
    tag << "fdt_o3[alpha=" << params.alpha << ",lambda=" << params.lambda << ",tau=" << tau << ",dt=" << dt << "]";
    const double theta = std::exp(-params.alpha * dt);
    // Relax until the variance deficit theta^{2 burn} is below 1e-4, then record
    // z at lags 0, 1, 5, 10.
    const long burn = static_cast<long>(std::ceil(std::log(1e-4) / (2.0 * std::log(theta))));
    const std::array<long, 3> lags = {1, 5, 10};
    Eigen::VectorXd s0 = Eigen::VectorXd::Zero(d), sq0 = Eigen::VectorXd::Zero(d);
    std::array<Eigen::VectorXd, 3> cross;
    for (auto& c : cross) c = Eigen::VectorXd::Zero(d);
    for (long i = 0; i < n; ++i) {
        SamplerState s{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
        for (long k = 0; k < burn; ++k) flow_O_order3(s, dt, params.lambda, params.alpha, tau, m, rng);
        const Eigen::VectorXd z0 = s.z;
        s0 += z0;
        sq0 += z0.cwiseAbs2();
        long t = 0;
        for (std::size_t li = 0; li < lags.size(); ++li) {
            for (; t < lags[li]; ++t) flow_O_order3(s, dt, params.lambda, params.alpha, tau, m, rng);
            cross[li] += z0.cwiseProduct(s.z);
        }
    }
    for (Eigen::Index j = 0; j < d; ++j) {
        const double mean = s0[j] / n;
        const double var = sq0[j] / n - mean * mean;
        const std::string coord = "[" + std::to_string(j) + "]";
        report.checks.push_back(relative_check(tag.str() + ".z_var" + coord, var, tau * m[j], 0.03));
        for (std::size_t li = 0; li < lags.size(); ++li) {
            const double corr = var > 0.0 ? (cross[li][j] / n) / var : 0.0;
            report.checks.push_back(relative_check(tag.str() + ".autocorr_lag" + std::to_string(lags[li]) + coord,
                                                   corr, std::exp(-params.alpha * lags[li] * dt), 0.05));
        }
    }
    return report;
}

ChannelToyResult gaussian_channel_toy(const ChannelToyConfig& config, Rng& rng) {
    if (!(config.alpha_p > 0.0 && config.alpha_p <= 1.0))
        throw std::invalid_argument("channel toy: alpha_p must lie in (0, 1]");
    if (config.n_r < 1 || config.n_u < 1) throw std::invalid_argument("channel toy: n_r, n_u must be >= 1");
    ChannelToyResult out;
    const int n_p = std::max(1, static_cast<int>(std::lround(config.alpha_p * config.n_u)));
    out.n_pilots = n_p;
    const double h_var = 2.0 * config.prior_var;  // complex entry variance

    ChannelSpec spec{config.n_r, config.n_u, 0.0, ChannelModel::IidRayleigh};
    const ComplexMatrix h = std::sqrt(h_var) * sample_channel(spec, rng);
    // First n_p columns of the n_u-point DFT: unit-modulus entries, P^H P = n_u I.
    ComplexMatrix p(config.n_u, n_p);
    const double two_pi = 2.0 * std::acos(-1.0);
    for (int j = 0; j < n_p; ++j)
        for (int i = 0; i < config.n_u; ++i)
            p(i, j) = std::polar(1.0, -two_pi * static_cast<double>((i * j) % config.n_u) / config.n_u);
    // SNR = E||HP||^2 / E||Z||^2 = n_u h_var / sigma0_c^2 with unit-energy pilots.
    const double snr = db_to_linear(config.snr_db);
    const double var_c = config.n_u * h_var / snr;
    const double sigma_r = std::sqrt(var_c / 2.0);
    ComplexMatrix y = h * p;
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            const double re = rng.normal();
            const double im = rng.normal();
            y(i, j) += std::complex<double>(sigma_r * re, sigma_r * im);
        }

    const double h_norm2 = h.squaredNorm();
    const ComplexMatrix gram =
        p * p.adjoint() + (var_c / h_var) * ComplexMatrix::Identity(config.n_u, config.n_u);
    const ComplexMatrix h_mmse = (y * p.adjoint()) * gram.inverse();
    out.mmse_nmse_db = 10.0 * std::log10((h_mmse - h).squaredNorm() / h_norm2);

    const Eigen::Index dim = 2 * static_cast<Eigen::Index>(config.n_r) * config.n_u;
    ScheduleConfig sc = config.schedule;
    sc.precond = PrecondMode::Identity;
    const AnnealSchedule schedule = build_schedule(sc, config.params, dim, Eigen::VectorXd(), sigma_r);
    const ChannelEstimationScore score(y, p, sigma_r, config.prior_var, schedule.sigmas, config.n_u);
    const SchemeSpec scheme = compile_scheme(config.scheme, config.params.order);
    try {
        const SamplerState final_state = anneal_run(score, schedule, config.params, scheme, rng);
        const ComplexMatrix h_hat = unpack_complex(final_state.x, config.n_r, config.n_u);
        out.nmse_db = 10.0 * std::log10((h_hat - h).squaredNorm() / h_norm2);
        if (!std::isfinite(out.nmse_db)) {
            out.diverged = true;
            out.nmse_db = std::numeric_limits<double>::infinity();
        }
    } catch (const DivergenceError& e) {
        out.diverged = true;
        out.diagnostic = e.what();
        out.nmse_db = std::numeric_limits<double>::infinity();
    }
    return out;
}

PosteriorMeanReport gaussian_posterior_check(const LinearGaussianScore& score, const AnnealSchedule& schedule,
                                             const DynamicsParams& params, const SchemeSpec& scheme, long runs,
                                             std::uint64_t seed, unsigned threads, double max_z) {
    if (runs < 2) throw std::invalid_argument("gaussian_posterior_check: need at least two runs");
    std::vector<Eigen::VectorXd> finals(static_cast<std::size_t>(runs));
    parallel_for(finals.size(), threads, [&](std::size_t r) {
        Rng rng(derive_seed(seed, {r}));
        finals[r] = anneal_run(score, schedule, params, scheme, rng).x;
    });
    PosteriorMeanReport out;
    out.runs = runs;
    const Eigen::Index d = score.dim();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
    for (const auto& x : finals) {
        sum += x;
        sq += x.cwiseAbs2();
    }
    const double n = static_cast<double>(runs);
    out.sample_mean = sum / n;
    const Eigen::VectorXd var = (sq / n - out.sample_mean.cwiseAbs2()) * (n / (n - 1.0));
    out.standard_error = (var / n).cwiseSqrt();
    out.exact_mean = score.posterior_mean();
    out.max_z = ((out.sample_mean - out.exact_mean).cwiseAbs().array() / out.standard_error.array()).maxCoeff();
    out.pass = std::isfinite(out.max_z) && out.max_z <= max_z;
    return out;
}

}  // namespace langevin
