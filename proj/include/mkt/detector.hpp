#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mkt/stats.hpp"
#include "mkt/var_model.hpp"

namespace mkt {

enum class MomentMode { colored, iid };

struct DetectorConfig {
    std::size_t dim = 1;
    std::size_t order = 5;
    double lambda1 = 0.99;  // RLS forgetting
    double lambda2 = 0.998; // kurtosis forgetting
    /// Residual covariance forgetting; defaults to lambda1.
    std::optional<double> lambda_cov;
    double alpha = 0.05;
    double delta = 1.0;
    MomentMode moments = MomentMode::colored;
    /// Lags tracked for the colored corrections.
    LagPolicy lags{};
    /// Bivariate colored moments: bootstrap size and refresh period (steps).
    std::size_t bootstrap_replicates = 200;
    std::size_t refresh_interval = 100;
    std::uint64_t seed = 0x64657465;
    /// V(t) counts as degenerate below this largest eigenvalue.
    double min_variance = 1e-12;
    /// Shift/scale the null moments by the steady-state behaviour of the
    /// tracker itself (V(t) contains the current residual and is noisy).
    bool calibrate_tracker = true;

    double covariance_factor() const noexcept { return lambda_cov.value_or(lambda1); }
    /// Equivalent uniform window of the kurtosis tracker, 2 / (1 - lambda2).
    double effective_window() const noexcept { return 2.0 / (1.0 - lambda2); }
    /// Residuals spent letting the RLS predictor settle: V(t) is updated but
    /// the kurtosis tracker is not. Twice the RLS window, 4 / (1 - lambda1), or
    /// 10 d p for lambda1 = 1.
    std::size_t settling_length() const noexcept;
    /// Verdicts before this sample index (1-based) are never alarms.
    std::size_t warmup_length() const noexcept;

    void validate() const;
};

enum class Phase { warming_up, monitoring, degenerate };

std::string_view to_string(Phase phase) noexcept;

struct DetectorOutput {
    std::size_t t = 0;  // 1-based sample index
    Phase phase = Phase::warming_up;
    TestVerdict verdict{};
    double statistic = 0.0;
    std::optional<Eigen::VectorXd> residual;

    bool alarm() const noexcept { return phase == Phase::monitoring && verdict.reject; }
};

/// Online kurtosis change detector on RLS-prewhitened residuals.
///
/// Per sample: a-priori residual e from the RLS predictor, then
///   V(t) = lc V(t-1) + (1 - lc) e e^T
///   B(t) = l2 B(t-1) + (1 - l2) (e^T V(t)^-1 e)^2
/// starting from V = I, B = 0. B is only updated once the predictor has
/// settled. The z-score uses B(t) / (1 - l2^k) after k kurtosis updates,
/// against null moments evaluated at the matching effective sample size
/// (which tends to 2 / (1 - l2)).
class Detector {
public:
    explicit Detector(DetectorConfig config);

    DetectorOutput step(const Eigen::VectorXd& x);

    const DetectorConfig& config() const noexcept { return config_; }
    const RlsState& rls() const noexcept { return rls_; }
    const Eigen::MatrixXd& residual_cov() const noexcept { return cov_; }
    double raw_statistic() const noexcept { return kurtosis_; }
    /// Bias-corrected kurtosis tracker (0 before the first update).
    double statistic() const noexcept;
    std::size_t time() const noexcept { return t_; }
    std::size_t kurtosis_updates() const noexcept { return updates_; }
    /// Effective sample size behind statistic().
    double effective_size() const noexcept;
    const TestVerdict& last_verdict() const noexcept { return verdict_; }
    bool degenerate() const noexcept { return degenerate_; }
    /// Null moments for the current step (monitoring phase only).
    NullMoments current_moments();

private:
    void track_lags(const Eigen::VectorXd& e);
    LagCovariance residual_lag_covariance() const;
    NullMoments bivariate_moments(double n_eff);

    DetectorConfig config_;
    RlsState rls_;
    Eigen::MatrixXd cov_;
    double kurtosis_ = 0.0;
    std::size_t t_ = 0;
    std::size_t updates_ = 0;
    std::size_t residuals_ = 0;
    TestVerdict verdict_{};
    bool degenerate_ = false;

    // exponentially weighted residual lag covariances, lags 1..L
    std::deque<Eigen::VectorXd> recent_;  // most recent first
    std::vector<Eigen::MatrixXd> lag_sums_;
    std::vector<double> lag_weights_;
    Eigen::MatrixXd zero_lag_sum_;
    double zero_lag_weight_ = 0.0;

    // cached bivariate correction, valid for boot_size_ samples
    std::optional<BootstrapEstimate> boot_;
    double boot_size_ = 0.0;
    std::size_t boot_step_ = 0;
    std::size_t refreshes_ = 0;
};

Detector detector_init(const DetectorConfig& config);
DetectorOutput detector_step(Detector& detector, const Eigen::VectorXd& x);

/// Steady-state mean and variance of the bias-corrected tracker on i.i.d.
/// N(0, I) residuals, by simulation. Cached per (d, lambda_cov, lambda2).
std::pair<double, double> tracker_null_moments(std::size_t dim, double lambda_cov, double lambda2);

/// Running sum of the instantaneous Gaussian-vs-uniform log-likelihood ratio.
struct CusumState {
    double sum = 0.0;
    std::size_t steps = 0;
};

/// L = -ln(2 sqrt 3) + ln(2 pi)/2 + eps^2/2, evaluated as written for any eps.
double cusum_log_likelihood_ratio(double eps) noexcept;

/// s <- s + L(eps); returns the new sum. Throws InvalidData on non-finite eps.
double cusum_step(CusumState& state, double eps);

/// One JSON line per detector step: {t, z, p_value, reject, B, s_cusum}.
struct VerdictRecord {
    std::size_t t;
    double z;
    double p_value;
    bool reject;
    double statistic;
    double cusum;
};
std::string to_json_line(const VerdictRecord& record);

} // namespace mkt
