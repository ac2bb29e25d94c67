#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mkt/series.hpp"

namespace mkt {

/// Which lags enter the colored moment corrections.
///
/// The correction sums run over 1..min(N-1, max_lag); a lag is dropped when
/// its largest normalized entry |S_ab(tau)| / sqrt(S_aa(0) S_bb(0)) is below
/// min_correlation.
struct LagPolicy {
    std::size_t max_lag = 50;
    double min_correlation = 0.01;

    std::size_t effective_max_lag(std::size_t n) const noexcept {
        return n == 0 ? 0 : std::min(n - 1, max_lag);
    }
};

/// Covariance function S(0)..S(max_lag), S(tau) = E{x(n) x(n - tau)^T}.
class LagCovariance {
public:
    explicit LagCovariance(std::vector<Eigen::MatrixXd> mats);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(mats_.front().rows()); }
    std::size_t max_lag() const noexcept { return mats_.size() - 1; }

    const Eigen::MatrixXd& at(std::size_t lag) const { return mats_.at(lag); }
    const Eigen::MatrixXd& zero_lag() const noexcept { return mats_.front(); }

    /// D^{-1/2} S(tau) D^{-1/2} with D = diag S(0).
    Eigen::MatrixXd normalized(std::size_t lag) const;

    /// Lags in 1..max_lag that survive the policy, ascending.
    std::vector<std::size_t> significant_lags(const LagPolicy& policy) const;

private:
    std::vector<Eigen::MatrixXd> mats_;
};

enum class MomentSource { iid_formula, colored_scalar_formula, colored_bivariate_bootstrap, user_supplied };

std::string_view to_string(MomentSource source) noexcept;

/// Mean and variance of the kurtosis statistic under the Gaussian null.
struct NullMoments {
    double mean;
    double variance;
    MomentSource source;

    NullMoments(double mean, double variance, MomentSource source);
};

struct TestVerdict {
    double z = 0.0;
    double p_value = 1.0;
    bool reject = false;
    double alpha = 0.05;
};

/// Analytic correction terms for the bivariate moments. Each callable maps
/// (S(0), S(tau)) to Q_i(tau); the moments are then evaluated in closed form.
struct AnalyticCorrection {
    std::function<double(const Eigen::MatrixXd& s0, const Eigen::MatrixXd& s_tau)> q1;
    std::function<double(const Eigen::MatrixXd& s0, const Eigen::MatrixXd& s_tau)> q2;
};

/// Parametric-bootstrap settings for the bivariate colored moments.
struct CalibrationConfig {
    std::size_t replicates = 500;
    std::uint64_t seed = 0x6d6b74;
    LagPolicy lags{};
    /// Cap on the surrogate VAR order fitted to the covariance function.
    std::size_t max_model_order = 20;
    unsigned threads = 1;
    std::optional<AnalyticCorrection> analytic;
};

/// Raw bootstrap output, before blending toward the white-noise terms.
struct BootstrapEstimate {
    double mean;
    double variance;
    double mean_stderr;
    double variance_stderr;
    std::size_t model_order;
    std::size_t replicates;
};

/// mats[tau] = (1/N) sum_{n >= tau} x(n) x(n - tau)^T. The series is used as
/// given; center it first if it is not zero-mean.
LagCovariance sample_lag_covariance(const MultiSeries& series, std::size_t max_lag);

/// Mardia's multivariate kurtosis (1/N) sum_n (x^T S^-1 x)^2 of the centered
/// series, with S the 1/N sample covariance. Throws DegenerateData when S is
/// singular or its condition number exceeds 1e12.
double multivariate_kurtosis(const MultiSeries& series);

NullMoments iid_moments(std::size_t d, std::size_t n);

/// Scalar moments corrected for serial correlation:
///   mean = 3 - 6/N - (12/N^2) sum (N - tau) rho(tau)^2
///   var  = (24/N) [1 + (2/N) sum (N - tau) rho(tau)^4]
NullMoments colored_scalar_moments(const LagCovariance& cov, std::size_t n, const LagPolicy& policy = {});

/// Bivariate moments corrected for serial correlation. Without analytic
/// corrections the tau-sums are calibrated by simulating Gaussian surrogates
/// that share the covariance function; see bootstrap_bivariate_moments.
NullMoments colored_bivariate_moments(const LagCovariance& cov, std::size_t n, const CalibrationConfig& calib = {});

/// Fits a Gaussian VAR to `cov` by Yule-Walker and returns the empirical
/// mean/variance of the bivariate kurtosis over `calib.replicates` surrogate
/// series of length n. The surrogate order is the highest significant lag,
/// capped at calib.max_model_order.
BootstrapEstimate bootstrap_bivariate_moments(const LagCovariance& cov, std::size_t n, const CalibrationConfig& calib);

/// z = (B - mean)/sqrt(var), p = 2(1 - Phi(|z|)), reject iff p < alpha.
TestVerdict normality_test(double statistic, const NullMoments& moments, double alpha);

double normal_cdf(double x) noexcept;

/// Two-sided p-value of a standard normal score.
double two_sided_p_value(double z) noexcept;

/// |z| at which two_sided_p_value equals alpha.
double two_sided_critical(double alpha);

} // namespace mkt
