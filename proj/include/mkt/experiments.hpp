#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mkt/detector.hpp"
#include "mkt/series.hpp"
#include "mkt/simulation.hpp"
#include "mkt/stats.hpp"

namespace mkt {

enum class Experiment { table1, table2, table3, table4, table5, change_demo, custom };

/// b1_*: scalar kurtosis of the first coordinate; b2_colored: bivariate;
/// bd_iid: Mardia's i.i.d. test in the native dimension.
enum class TestKind { b1_iid, b1_colored, b2_colored, bd_iid };

std::string_view to_string(Experiment id) noexcept;
std::string_view to_string(TestKind test) noexcept;
Experiment parse_experiment(std::string_view name);
TestKind parse_test_kind(std::string_view name);

struct ExperimentConfig {
    Experiment id = Experiment::table1;
    std::size_t simulations = 300;
    std::size_t samples = 1000;
    double alpha = 0.05;
    std::uint64_t seed = 20220901;
    std::vector<TestKind> tests{TestKind::b1_iid, TestKind::b1_colored, TestKind::b2_colored};
    /// True model orders; empty selects the protocol default.
    std::vector<std::size_t> orders;
    /// Fitted orders for residual protocols; empty selects the protocol default.
    std::vector<std::size_t> fitted_orders;
    LagPolicy lags{};
    std::size_t replicates = 500;
    double cutoff = 0.25;
    LowpassShape shape{};
    /// Spectral radius of the random 3-D VAR models.
    double var_radius = 0.9;
    /// 0 picks std::thread::hardware_concurrency().
    unsigned threads = 0;
    std::string output;

    // change demo
    double lambda1 = 0.99;
    double lambda2 = 0.998;
    std::optional<double> lambda_cov;
    std::size_t detector_order = 5;
    double delta = 1.0;

    /// M = 2000 as in the original study.
    void use_full_scale() { simulations = 2000; }
    void validate() const;
};

struct RejectionCell {
    std::string protocol;     // e.g. "direct", "residuals p_hat=9", "projection 2-D"
    std::string scenario;     // e.g. "AR(4)", "VAR(5) 3-D"
    std::string distribution; // "gaussian" | "uniform"
    TestKind test = TestKind::b1_iid;
    std::size_t rejections = 0;
    std::size_t simulations = 0;
    /// Simulations where the test could not be evaluated (counted as no rejection).
    std::size_t failures = 0;
    double runtime_seconds = 0.0;

    double rate() const noexcept;
    /// Binomial standard error sqrt(r (1 - r) / M).
    double standard_error() const noexcept;
};

struct RejectionReport {
    Experiment id = Experiment::table1;
    ExperimentConfig config;
    std::vector<RejectionCell> cells;

    const RejectionCell& find(std::string_view protocol, std::string_view scenario,
                              std::string_view distribution, TestKind test) const;
};

/// Monte Carlo size/power for one of the table protocols. Simulation i of
/// scenario/distribution group g draws from derive_seed(seed, {g, i}); the
/// realization is shared by every protocol and test of that group.
RejectionReport run_rejection_experiment(const ExperimentConfig& config);

/// Runtime is left out unless requested so equal configs give equal bytes.
std::string to_json(const RejectionReport& report, bool include_timing = false);

struct TrajectoryRow {
    std::size_t t;  // 0-based scalar sample index
    double z_b1;
    double z_b2;
    double cusum;
    bool reject_b1;
    bool reject_b2;
    bool monitoring_b1;
    bool monitoring_b2;
};

/// Rejection pattern of one detector, in scalar sample units.
struct DetectionSummary {
    std::size_t monitor_start = 0;
    double pre_change_rejection_rate = 0.0;
    /// Start of the first run of >= min_run consecutive rejections at or
    /// after the change onset.
    std::optional<std::size_t> sustained_onset;
    /// Last rejecting sample, if any.
    std::optional<std::size_t> last_rejection;
    std::size_t longest_run_in_change = 0;
};

struct CusumSummary {
    double slope_before = 0.0;
    double slope_during = 0.0;
    double slope_after = 0.0;
    /// |slope_during - slope_before| / |slope_before|.
    double relative_slope_change = 0.0;
};

struct ChangeDemoResult {
    std::size_t change_begin = 0;
    std::size_t change_end = 0;
    double critical = 1.959963984540054;
    double effective_window = 0.0;
    std::vector<TrajectoryRow> rows;
    DetectionSummary b1;
    DetectionSummary b2;
    CusumSummary cusum;
};

/// Runs the scalar (B1) and embedded bivariate (B2) detectors plus the CUSUM
/// baseline over the change scenario. The B2 detector sees pairs
/// (x(2k), x(2k+1)) and its verdict is held between pairs.
ChangeDemoResult run_change_demo(const ExperimentConfig& config);

DetectionSummary summarize_detection(const std::vector<TrajectoryRow>& rows, bool bivariate,
                                     std::size_t change_begin, std::size_t change_end, std::size_t min_run = 50);

/// Least-squares slopes of the CUSUM path before, during and after the change.
/// The first segment starts at skip.
CusumSummary summarize_cusum(const std::vector<TrajectoryRow>& rows, std::size_t change_begin,
                             std::size_t change_end, std::size_t skip);

void write_trajectory_csv(std::ostream& out, const ChangeDemoResult& result);
std::string to_json(const ChangeDemoResult& result);

/// Result of testing a user-provided series.
struct SeriesTestEntry {
    TestKind test;
    double statistic;
    NullMoments moments;
    TestVerdict verdict;
};

struct SeriesTestReport {
    std::size_t length = 0;
    std::size_t dim = 0;
    std::vector<SeriesTestEntry> entries;
};

/// Centers the series, then runs each selected test at level alpha.
SeriesTestReport test_series(const MultiSeries& series, const std::vector<TestKind>& tests, double alpha,
                             const LagPolicy& lags = {}, const CalibrationConfig& calib = {});

/// read_csv_file + test_series.
SeriesTestReport test_csv(const std::string& path, std::size_t dim, const std::vector<TestKind>& tests,
                          double alpha, const LagPolicy& lags = {});

std::string to_json(const SeriesTestReport& report);

} // namespace mkt
