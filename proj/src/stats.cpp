#include "mkt/stats.hpp"

#include <cmath>
#include <limits>
#include <thread>

#include "mkt/errors.hpp"
#include "mkt/rng.hpp"
#include "mkt/simulation.hpp"
#include "mkt/var_model.hpp"

namespace mkt {
namespace {

constexpr double max_condition = 1e12;

double condition_of(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || !(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

void require_positive_definite(const Eigen::MatrixXd& s, const char* what) {
    const double cond = condition_of(s);
    if (!(cond <= max_condition))
        throw DegenerateData(std::string(what) + " is singular or ill-conditioned (condition estimate " +
                                 std::to_string(cond) + ")",
                             cond);
}

double white_bivariate_mean(double n) { return 8.0 - 16.0 / n; }
double white_bivariate_variance(double n) { return 64.0 / n; }

// Pulls a noisy estimate toward a reference: the weight on the estimate is
// diff^2 / (diff^2 + se^2), so differences within Monte Carlo error shrink away.
double shrink_toward(double reference, double estimate, double stderr_) {
    const double diff = estimate - reference;
    const double denom = diff * diff + stderr_ * stderr_;
    if (denom <= 0.0) return reference;
    return reference + diff * (diff * diff / denom);
}

} // namespace

LagCovariance::LagCovariance(std::vector<Eigen::MatrixXd> mats) : mats_(std::move(mats)) {
    if (mats_.empty()) throw InvalidArgument("covariance function needs at least S(0)");
    const auto d = mats_.front().rows();
    if (d < 1 || mats_.front().cols() != d) throw InvalidArgument("S(0) must be square");
    for (const auto& m : mats_) {
        if (m.rows() != d || m.cols() != d) throw InvalidArgument("all lags must share the dimension of S(0)");
        if (!m.allFinite()) throw InvalidData("covariance function contains non-finite entries");
    }
}

Eigen::MatrixXd LagCovariance::normalized(std::size_t lag) const {
    const Eigen::VectorXd diag = zero_lag().diagonal();
    if ((diag.array() <= 0.0).any())
        throw DegenerateData("zero variance coordinate in S(0)", std::numeric_limits<double>::infinity());
    const Eigen::VectorXd inv_sd = diag.array().rsqrt();
    return inv_sd.asDiagonal() * at(lag) * inv_sd.asDiagonal();
}

std::vector<std::size_t> LagCovariance::significant_lags(const LagPolicy& policy) const {
    std::vector<std::size_t> lags;
    const auto last = std::min(max_lag(), policy.max_lag);
    for (std::size_t tau = 1; tau <= last; ++tau) {
        if (normalized(tau).cwiseAbs().maxCoeff() >= policy.min_correlation) lags.push_back(tau);
    }
    return lags;
}

std::string_view to_string(MomentSource source) noexcept {
    switch (source) {
    case MomentSource::iid_formula: return "iid_formula";
    case MomentSource::colored_scalar_formula: return "colored_scalar_formula";
    case MomentSource::colored_bivariate_bootstrap: return "colored_bivariate_bootstrap";
    case MomentSource::user_supplied: return "user_supplied";
    }
    return "unknown";
}

NullMoments::NullMoments(double mean_, double variance_, MomentSource source_)
    : mean(mean_), variance(variance_), source(source_) {
    if (!(mean > 0.0) || !std::isfinite(mean)) throw InvalidArgument("null mean must be positive and finite");
    if (!(variance > 0.0) || !std::isfinite(variance))
        throw InvalidArgument("null variance must be positive and finite");
}

LagCovariance sample_lag_covariance(const MultiSeries& series, std::size_t max_lag) {
    const auto n = series.length();
    if (max_lag >= n) throw InvalidArgument("max_lag must be smaller than the series length");
    const Eigen::MatrixXd& x = series.values();
    const auto rows = static_cast<Eigen::Index>(n);
    std::vector<Eigen::MatrixXd> mats;
    mats.reserve(max_lag + 1);
    for (std::size_t tau = 0; tau <= max_lag; ++tau) {
        const auto t = static_cast<Eigen::Index>(tau);
        // sum_n x(n) x(n - tau)^T over n = tau..N-1
        Eigen::MatrixXd s = x.bottomRows(rows - t).transpose() * x.topRows(rows - t);
        s /= static_cast<double>(n);
        if (tau == 0) s = 0.5 * (s + s.transpose()).eval();
        mats.push_back(std::move(s));
    }
    return LagCovariance(std::move(mats));
}

double multivariate_kurtosis(const MultiSeries& series) {
    const auto n = series.length();
    const auto d = series.dim();
    if (n <= d) throw InvalidArgument("kurtosis needs more samples than dimensions");
    const Eigen::MatrixXd x = series.values().rowwise() - series.values().colwise().mean();
    Eigen::MatrixXd s = (x.transpose() * x) / static_cast<double>(n);
    s = 0.5 * (s + s.transpose()).eval();
    require_positive_definite(s, "sample covariance");

    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    // rows of y are L^-1 x(n); x^T S^-1 x = |y|^2
    const Eigen::MatrixXd y = llt.matrixL().solve(x.transpose());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.cols(); ++i) {
        const double q = y.col(i).squaredNorm();
        acc += q * q;
    }
    return acc / static_cast<double>(n);
}

NullMoments iid_moments(std::size_t d, std::size_t n) {
    if (d < 1 || n < 1) throw InvalidArgument("iid_moments needs d >= 1 and N >= 1");
    const double dd = static_cast<double>(d);
    const double mu = dd * (dd + 2.0);
    return {mu, 8.0 * mu / static_cast<double>(n), MomentSource::iid_formula};
}

NullMoments colored_scalar_moments(const LagCovariance& cov, std::size_t n, const LagPolicy& policy) {
    if (cov.dim() != 1) throw InvalidArgument("colored_scalar_moments needs a scalar covariance function");
    if (n < 1) throw InvalidArgument("N must be positive");
    const double s0 = cov.zero_lag()(0, 0);
    if (!(s0 > 0.0)) throw DegenerateData("S(0) must be positive", std::numeric_limits<double>::infinity());

    const double nn = static_cast<double>(n);
    const auto last = std::min(policy.effective_max_lag(n), cov.max_lag());
    double sum2 = 0.0;
    double sum4 = 0.0;
    for (std::size_t tau = 1; tau <= last; ++tau) {
        const double rho = cov.at(tau)(0, 0) / s0;
        if (std::abs(rho) > 1.0 + 1e-12) throw InvalidData("normalized correlation exceeds 1 in magnitude");
        if (std::abs(rho) < policy.min_correlation) continue;
        const double w = nn - static_cast<double>(tau);
        const double r2 = rho * rho;
        sum2 += w * r2;
        sum4 += w * r2 * r2;
    }
    const double mean = 3.0 - 6.0 / nn - 12.0 / (nn * nn) * sum2;
    const double variance = 24.0 / nn * (1.0 + 2.0 / nn * sum4);
    return {mean, variance, MomentSource::colored_scalar_formula};
}

BootstrapEstimate bootstrap_bivariate_moments(const LagCovariance& cov, std::size_t n, const CalibrationConfig& calib) {
    if (cov.dim() != 2) throw InvalidArgument("bivariate moments need a 2-D covariance function");
    if (calib.replicates < 2) throw InvalidArgument("bootstrap needs at least two replicates");
    if (n < 3) throw InvalidArgument("bootstrap series length must exceed the dimension");
    require_positive_definite(cov.zero_lag(), "S(0)");

    const auto lags = cov.significant_lags(calib.lags);
    std::size_t order = lags.empty() ? 1 : lags.back();
    order = std::min({order, calib.max_model_order, cov.max_lag()});
    order = std::max<std::size_t>(order, 1);

    YuleWalkerFit fit = [&] {
        try {
            return fit_yule_walker(cov, order);
        } catch (const DataError& e) {
            throw CalibrationFailure(std::string("bootstrap VAR fit failed: ") + e.what());
        }
    }();
    const double radius = fit.model.spectral_radius();
    if (!(radius < 1.0)) throw CalibrationFailure("bootstrap VAR fit is unstable (spectral radius >= 1)");
    Eigen::LLT<Eigen::MatrixXd> noise(fit.innovation_cov);
    if (noise.info() != Eigen::Success) throw CalibrationFailure("bootstrap innovation covariance is not positive definite");
    const Eigen::MatrixXd factor = noise.matrixL();

    // the zero start biases the variance by about radius^(2t); run until that is below 1e-8
    std::size_t burn_in = 10 * order;
    if (radius > 0.0) {
        const double needed = std::log(1e-8) / (2.0 * std::log(radius));
        burn_in = std::max(burn_in, static_cast<std::size_t>(std::ceil(std::min(needed, 1e5))));
    }

    const std::size_t reps = calib.replicates;
    std::vector<double> values(reps, 0.0);
    auto work = [&](std::size_t begin, std::size_t stride) {
        Eigen::MatrixXd buffer;
        for (std::size_t r = begin; r < reps; r += stride) {
            Rng rng(derive_seed(calib.seed, {r}));
            simulate_gaussian_var(fit.model, factor, n, burn_in, rng, buffer);
            values[r] = multivariate_kurtosis(MultiSeries(buffer));
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(calib.threads, static_cast<unsigned>(reps)));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work, i, threads);
    }

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(reps);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(reps - 1);

    const double r = static_cast<double>(reps);
    return {mean, var, std::sqrt(var / r), var * std::sqrt(2.0 / (r - 1.0)), order, reps};
}

NullMoments colored_bivariate_moments(const LagCovariance& cov, std::size_t n, const CalibrationConfig& calib) {
    if (cov.dim() != 2) throw InvalidArgument("colored_bivariate_moments needs a 2-D covariance function");
    if (n < 1) throw InvalidArgument("N must be positive");
    require_positive_definite(cov.zero_lag(), "S(0)");
    const double nn = static_cast<double>(n);

    if (calib.analytic) {
        const auto& s0 = cov.zero_lag();
        const double det = s0(0, 0) * s0(1, 1) - s0(0, 1) * s0(0, 1);
        const auto last = std::min(calib.lags.effective_max_lag(n), cov.max_lag());
        double sum1 = 0.0;
        double sum2 = 0.0;
        for (std::size_t tau = 1; tau <= last; ++tau) {
            const double w = nn - static_cast<double>(tau);
            if (calib.analytic->q1) sum1 += w * calib.analytic->q1(s0, cov.at(tau));
            if (calib.analytic->q2) sum2 += w * calib.analytic->q2(s0, cov.at(tau));
        }
        const double mean = white_bivariate_mean(nn) - 4.0 / (nn * nn) * sum1 / (det * det);
        const double variance = white_bivariate_variance(nn) + 16.0 / (nn * nn) * sum2 / std::pow(det, 4);
        return {mean, variance, MomentSource::user_supplied};
    }

    if (cov.significant_lags(calib.lags).empty())
        return {white_bivariate_mean(nn), white_bivariate_variance(nn), MomentSource::colored_bivariate_bootstrap};

    const BootstrapEstimate boot = bootstrap_bivariate_moments(cov, n, calib);
    const double mean = shrink_toward(white_bivariate_mean(nn), boot.mean, boot.mean_stderr);
    const double variance = shrink_toward(white_bivariate_variance(nn), boot.variance, boot.variance_stderr);
    return {mean, variance, MomentSource::colored_bivariate_bootstrap};
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double two_sided_p_value(double z) noexcept { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double two_sided_critical(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
    double lo = 0.0, hi = 40.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (two_sided_p_value(mid) > alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

TestVerdict normality_test(double statistic, const NullMoments& moments, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
    TestVerdict v;
    v.alpha = alpha;
    v.z = (statistic - moments.mean) / std::sqrt(moments.variance);
    v.p_value = two_sided_p_value(v.z);
    v.reject = v.p_value < alpha;
    return v;
}

} // namespace mkt
