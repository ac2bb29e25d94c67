#include "mkt/detector.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>
#include <numbers>

#include <json.hpp>

#include "mkt/errors.hpp"
#include "mkt/rng.hpp"

namespace mkt {
namespace {

constexpr double max_condition = 1e12;

double white_bivariate_mean(double n) { return 8.0 - 16.0 / n; }
double white_bivariate_variance(double n) { return 64.0 / n; }

double shrink_toward(double reference, double estimate, double stderr_) {
    const double diff = estimate - reference;
    const double denom = diff * diff + stderr_ * stderr_;
    if (denom <= 0.0) return reference;
    return reference + diff * (diff * diff / denom);
}

// colored scalar formula with a non-integer sample size
NullMoments scalar_moments(const LagCovariance& cov, double n, const LagPolicy& policy) {
    const double s0 = cov.zero_lag()(0, 0);
    double sum2 = 0.0;
    double sum4 = 0.0;
    for (std::size_t tau = 1; tau <= std::min(cov.max_lag(), policy.max_lag); ++tau) {
        const double w = n - static_cast<double>(tau);
        if (w <= 0.0) break;
        const double rho = std::clamp(cov.at(tau)(0, 0) / s0, -1.0, 1.0);
        if (std::abs(rho) < policy.min_correlation) continue;
        const double r2 = rho * rho;
        sum2 += w * r2;
        sum4 += w * r2 * r2;
    }
    return {3.0 - 6.0 / n - 12.0 / (n * n) * sum2, 24.0 / n * (1.0 + 2.0 / n * sum4),
            MomentSource::colored_scalar_formula};
}

} // namespace

std::size_t DetectorConfig::settling_length() const noexcept {
    if (lambda1 >= 1.0) return 10 * dim * order;
    return static_cast<std::size_t>(std::ceil(4.0 / (1.0 - lambda1)));
}

std::size_t DetectorConfig::warmup_length() const noexcept {
    return order + settling_length() + static_cast<std::size_t>(std::ceil(effective_window() / 4.0));
}

void DetectorConfig::validate() const {
    if (dim < 1) throw InvalidArgument("detector dimension must be positive");
    if (order < 1) throw InvalidArgument("detector VAR order must be at least 1");
    if (!(lambda1 > 0.0 && lambda1 <= 1.0)) throw InvalidArgument("lambda1 must lie in (0, 1]");
    if (!(lambda2 > 0.0 && lambda2 < 1.0)) throw InvalidArgument("lambda2 must lie in (0, 1)");
    const double lc = covariance_factor();
    if (!(lc > 0.0 && lc < 1.0)) throw InvalidArgument("covariance forgetting factor must lie in (0, 1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
    if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
    if (moments == MomentMode::colored && dim > 2)
        throw InvalidArgument("colored moments are available for d <= 2 only");
    if (bootstrap_replicates < 2) throw InvalidArgument("bootstrap needs at least two replicates");
    if (refresh_interval < 1) throw InvalidArgument("refresh interval must be positive");
    if (!(min_variance >= 0.0)) throw InvalidArgument("min_variance must be non-negative");
}

std::string_view to_string(Phase phase) noexcept {
    switch (phase) {
    case Phase::warming_up: return "warming_up";
    case Phase::monitoring: return "monitoring";
    case Phase::degenerate: return "degenerate";
    }
    return "unknown";
}

Detector::Detector(DetectorConfig config)
    : config_((config.validate(), std::move(config))),
      rls_(config_.dim, config_.order, config_.lambda1, config_.delta) {
    const auto d = static_cast<Eigen::Index>(config_.dim);
    cov_ = Eigen::MatrixXd::Identity(d, d);
    zero_lag_sum_ = Eigen::MatrixXd::Zero(d, d);
    verdict_.alpha = config_.alpha;
    if (config_.moments == MomentMode::colored) {
        lag_sums_.assign(config_.lags.max_lag, Eigen::MatrixXd::Zero(d, d));
        lag_weights_.assign(config_.lags.max_lag, 0.0);
    }
}

double Detector::statistic() const noexcept {
    if (updates_ == 0) return 0.0;
    return kurtosis_ / (1.0 - std::pow(config_.lambda2, static_cast<double>(updates_)));
}

double Detector::effective_size() const noexcept {
    if (updates_ == 0) return 0.0;
    const double lk = std::pow(config_.lambda2, static_cast<double>(updates_));
    return config_.effective_window() * (1.0 - lk) / (1.0 + lk);
}

void Detector::track_lags(const Eigen::VectorXd& e) {
    const double l2 = config_.lambda2;
    zero_lag_sum_ = l2 * zero_lag_sum_ + e * e.transpose();
    zero_lag_weight_ = l2 * zero_lag_weight_ + 1.0;
    for (std::size_t k = 0; k < recent_.size(); ++k) {
        lag_sums_[k] = l2 * lag_sums_[k] + e * recent_[k].transpose();
        lag_weights_[k] = l2 * lag_weights_[k] + 1.0;
    }
    if (config_.lags.max_lag == 0) return;
    recent_.push_front(e);
    if (recent_.size() > config_.lags.max_lag) recent_.pop_back();
}

LagCovariance Detector::residual_lag_covariance() const {
    std::vector<Eigen::MatrixXd> mats{zero_lag_sum_ / zero_lag_weight_};
    for (std::size_t k = 0; k < lag_sums_.size() && lag_weights_[k] > 0.0; ++k)
        mats.push_back(lag_sums_[k] / lag_weights_[k]);
    return LagCovariance(std::move(mats));
}

NullMoments Detector::bivariate_moments(double n_eff) {
    const auto cov = residual_lag_covariance();
    if (cov.significant_lags(config_.lags).empty())
        return {white_bivariate_mean(n_eff), white_bivariate_variance(n_eff), MomentSource::colored_bivariate_bootstrap};

    if (!boot_ || t_ - boot_step_ >= config_.refresh_interval) {
        CalibrationConfig calib;
        calib.replicates = config_.bootstrap_replicates;
        calib.seed = derive_seed(config_.seed, {refreshes_++});
        calib.lags = config_.lags;
        const double size = std::max(n_eff, 16.0);
        try {
            boot_ = bootstrap_bivariate_moments(cov, static_cast<std::size_t>(std::lround(size)), calib);
            boot_size_ = std::round(size);
        } catch (const DataError&) {
            boot_.reset();
        }
        boot_step_ = t_;
    }
    if (!boot_)
        return {white_bivariate_mean(n_eff), white_bivariate_variance(n_eff), MomentSource::colored_bivariate_bootstrap};

    // the correction to the mean scales like 1/N, the variance ratio stays put
    const double ref_mean = white_bivariate_mean(boot_size_);
    const double ref_var = white_bivariate_variance(boot_size_);
    const double mean_shift = shrink_toward(ref_mean, boot_->mean, boot_->mean_stderr) - ref_mean;
    const double var_ratio = shrink_toward(ref_var, boot_->variance, boot_->variance_stderr) / ref_var;
    const double scale = boot_size_ / n_eff;
    return {white_bivariate_mean(n_eff) + mean_shift * scale, white_bivariate_variance(n_eff) * var_ratio,
            MomentSource::colored_bivariate_bootstrap};
}

NullMoments Detector::current_moments() {
    if (updates_ == 0) throw InvalidArgument("no kurtosis updates yet");
    const double n = effective_size();
    const double d = static_cast<double>(config_.dim);
    NullMoments m = [&]() -> NullMoments {
        if (config_.moments == MomentMode::iid) return {d * (d + 2.0), 8.0 * d * (d + 2.0) / n, MomentSource::iid_formula};
        if (config_.dim == 1) return scalar_moments(residual_lag_covariance(), n, config_.lags);
        return bivariate_moments(n);
    }();
    if (!config_.calibrate_tracker) return m;
    const auto [mc_mean, mc_var] = tracker_null_moments(config_.dim, config_.covariance_factor(), config_.lambda2);
    const double white_var = 8.0 * d * (d + 2.0) / config_.effective_window();
    return {m.mean + (mc_mean - d * (d + 2.0)), m.variance * (mc_var / white_var), m.source};
}

std::pair<double, double> tracker_null_moments(std::size_t dim, double lambda_cov, double lambda2) {
    if (dim < 1) throw InvalidArgument("dimension must be positive");
    if (!(lambda_cov > 0.0 && lambda_cov < 1.0) || !(lambda2 > 0.0 && lambda2 < 1.0))
        throw InvalidArgument("forgetting factors must lie in (0, 1)");
    static std::mutex guard;
    static std::map<std::tuple<std::size_t, double, double>, std::pair<double, double>> cache;
    const auto key = std::make_tuple(dim, lambda_cov, lambda2);
    {
        std::lock_guard lock(guard);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }

    const double window = 2.0 / (1.0 - std::min(lambda_cov, lambda2));
    const auto burn = static_cast<std::size_t>(20.0 * window);
    const auto steps = static_cast<std::size_t>(500.0 * 2.0 / (1.0 - lambda2));
    const auto d = static_cast<Eigen::Index>(dim);
    Rng rng(derive_seed(0x747261636b, {dim}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd e(d);
    double b = 0.0, sum = 0.0, sum2 = 0.0;
    for (std::size_t t = 0; t < burn + steps; ++t) {
        for (Eigen::Index i = 0; i < d; ++i) e(i) = gauss(rng);
        v = lambda_cov * v + (1.0 - lambda_cov) * e * e.transpose();
        double q;
        if (d == 1) {
            q = e(0) * e(0) / v(0, 0);
        } else if (d == 2) {
            const double det = v(0, 0) * v(1, 1) - v(0, 1) * v(0, 1);
            q = (v(1, 1) * e(0) * e(0) - 2.0 * v(0, 1) * e(0) * e(1) + v(0, 0) * e(1) * e(1)) / det;
        } else {
            q = e.dot(v.llt().solve(e));
        }
        b = lambda2 * b + (1.0 - lambda2) * q * q;
        if (t >= burn) {
            sum += b;
            sum2 += b * b;
        }
    }
    const double n = static_cast<double>(steps);
    const double mean = sum / n;
    const std::pair<double, double> out{mean, sum2 / n - mean * mean};
    std::lock_guard lock(guard);
    cache.emplace(key, out);
    return out;
}

DetectorOutput Detector::step(const Eigen::VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != config_.dim) throw InvalidArgument("observation has the wrong dimension");
    if (!x.allFinite()) throw InvalidData("observation is not finite");
    ++t_;
    DetectorOutput out;
    out.t = t_;

    std::optional<Eigen::VectorXd> e;
    try {
        e = rls_.push(x);
    } catch (const NumericOverflow&) {
        degenerate_ = true;
        out.phase = Phase::degenerate;
        out.verdict = verdict_;
        out.statistic = statistic();
        return out;
    }
    if (!e) {
        out.phase = Phase::warming_up;
        return out;
    }
    out.residual = e;

    auto hold = [&] {
        degenerate_ = true;
        out.phase = Phase::degenerate;
        out.verdict = verdict_;
        out.statistic = statistic();
        return out;
    };
    if (e->isZero(0.0)) return hold();

    const double lc = config_.covariance_factor();
    Eigen::MatrixXd next = lc * cov_ + (1.0 - lc) * (*e) * e->transpose();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(next);
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    if (!(hi >= config_.min_variance) || !(lo > 0.0) || hi / lo > max_condition) return hold();
    cov_ = std::move(next);
    degenerate_ = false;
    if (++residuals_ <= config_.settling_length()) {
        out.phase = Phase::warming_up;
        return out;
    }

    const Eigen::VectorXd w = eig.eigenvectors().transpose() * (*e);
    const double q = (w.array().square() / eig.eigenvalues().array()).sum();
    kurtosis_ = config_.lambda2 * kurtosis_ + (1.0 - config_.lambda2) * q * q;
    ++updates_;
    if (config_.moments == MomentMode::colored) track_lags(*e);

    out.statistic = statistic();
    if (t_ < config_.warmup_length()) {
        out.phase = Phase::warming_up;
        return out;
    }
    verdict_ = normality_test(out.statistic, current_moments(), config_.alpha);
    out.phase = Phase::monitoring;
    out.verdict = verdict_;
    return out;
}

Detector detector_init(const DetectorConfig& config) { return Detector(config); }

DetectorOutput detector_step(Detector& detector, const Eigen::VectorXd& x) { return detector.step(x); }

double cusum_log_likelihood_ratio(double eps) noexcept {
    return -std::log(2.0 * std::sqrt(3.0)) + 0.5 * std::log(2.0 * std::numbers::pi) + 0.5 * eps * eps;
}

double cusum_step(CusumState& state, double eps) {
    if (!std::isfinite(eps)) throw InvalidData("CUSUM input is not finite");
    state.sum += cusum_log_likelihood_ratio(eps);
    ++state.steps;
    return state.sum;
}

std::string to_json_line(const VerdictRecord& r) {
    const nlohmann::json j{{"t", r.t},         {"z", r.z},         {"p_value", r.p_value},
                           {"reject", r.reject}, {"B", r.statistic}, {"s_cusum", r.cusum}};
    return j.dump();
}

} // namespace mkt
