#include "mkt/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "mkt/csv.hpp"
#include "mkt/errors.hpp"
#include "mkt/rng.hpp"

namespace mkt {
namespace {

using json = nlohmann::json;

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) body(i);
        });
}

// What each test sees in one simulation: b1 tests use the first column of
// `b1`, b2 the first two columns of `b2`, bd_iid the whole of `native`.
struct Inputs {
    std::optional<MultiSeries> b1;
    std::optional<MultiSeries> b2;
    std::optional<MultiSeries> native;
};

struct Group {
    std::string scenario;
    std::string distribution;
    std::vector<std::string> protocols;
    std::function<std::vector<Inputs>(std::uint64_t seed)> realize;
};

MultiSeries first_columns(const MultiSeries& s, std::size_t k) {
    if (s.dim() < k) throw InvalidArgument("test needs at least " + std::to_string(k) + " columns");
    if (s.dim() == k) return s;
    return MultiSeries(s.values().leftCols(static_cast<Eigen::Index>(k)));
}

SeriesTestEntry evaluate(TestKind test, const MultiSeries& data, double alpha, const LagPolicy& lags,
                         const CalibrationConfig& calib) {
    const auto n = data.length();
    const auto max_lag = lags.effective_max_lag(n);
    switch (test) {
    case TestKind::b1_iid: {
        const auto y = first_columns(data, 1);
        const double b = multivariate_kurtosis(y);
        const auto m = iid_moments(1, n);
        return {test, b, m, normality_test(b, m, alpha)};
    }
    case TestKind::b1_colored: {
        const auto y = first_columns(data, 1).centered();
        const double b = multivariate_kurtosis(y);
        const auto m = colored_scalar_moments(sample_lag_covariance(y, max_lag), n, lags);
        return {test, b, m, normality_test(b, m, alpha)};
    }
    case TestKind::b2_colored: {
        const auto y = first_columns(data, 2).centered();
        const double b = multivariate_kurtosis(y);
        const auto m = colored_bivariate_moments(sample_lag_covariance(y, max_lag), n, calib);
        return {test, b, m, normality_test(b, m, alpha)};
    }
    case TestKind::bd_iid: {
        const double b = multivariate_kurtosis(data);
        const auto m = iid_moments(data.dim(), n);
        return {test, b, m, normality_test(b, m, alpha)};
    }
    }
    throw InvalidArgument("unknown test");
}

const MultiSeries& input_for(TestKind test, const Inputs& in) {
    const auto& slot = test == TestKind::b2_colored ? in.b2 : test == TestKind::bd_iid ? in.native : in.b1;
    if (!slot) throw InvalidArgument(std::string("protocol has no input for test ") + std::string(to_string(test)));
    return *slot;
}

InnovationSpec scalar_spec(bool uniform) { return uniform ? InnovationSpec::unit_uniform(1) : InnovationSpec::gaussian(1); }

std::string ar_name(std::size_t p) { return "AR(" + std::to_string(p) + ")"; }
std::string p_hat_name(std::size_t p) { return "residuals p_hat=" + std::to_string(p); }

std::vector<Group> build_groups(const ExperimentConfig& cfg) {
    std::vector<Group> groups;
    const std::size_t n = cfg.samples;
    auto pick = [](const std::vector<std::size_t>& given, std::vector<std::size_t> fallback) {
        return given.empty() ? fallback : given;
    };
    const std::vector<bool> both{false, true};

    switch (cfg.id) {
    case Experiment::table1:
    case Experiment::table2:
    case Experiment::custom: {
        std::vector<std::size_t> orders;
        if (cfg.id == Experiment::table1) orders = pick(cfg.orders, {4, 14});
        else if (cfg.id == Experiment::table2) orders = pick(cfg.orders, {20});
        else orders = cfg.orders;
        if (orders.empty()) throw InvalidArgument("custom experiment needs model orders");
        for (auto p : orders) {
            const auto model = design_lowpass_ar(p, cfg.cutoff, cfg.shape);
            for (bool uni : both) {
                groups.push_back({ar_name(p), uni ? "uniform" : "gaussian", {"direct"},
                                  [model, uni, n](std::uint64_t seed) {
                                      const auto x = simulate_var(model, 2 * n, scalar_spec(uni), seed);
                                      const auto pairs = embed(x, 2).centered();
                                      return std::vector<Inputs>{{pairs, pairs, pairs}};
                                  }});
            }
        }
        break;
    }
    case Experiment::table3: {
        const auto orders = pick(cfg.orders, {20});
        const auto fitted = pick(cfg.fitted_orders, {20, 9});
        const std::size_t extra = *std::max_element(fitted.begin(), fitted.end());
        std::vector<std::string> names;
        for (auto q : fitted) names.push_back(p_hat_name(q));
        for (auto p : orders) {
            const auto model = design_lowpass_ar(p, cfg.cutoff, cfg.shape);
            for (bool uni : both) {
                groups.push_back({ar_name(p), uni ? "uniform" : "gaussian", names,
                                  [model, uni, n, fitted, extra](std::uint64_t seed) {
                                      const auto x = simulate_var(model, 2 * n + extra, scalar_spec(uni), seed);
                                      std::vector<Inputs> out;
                                      for (auto q : fitted) {
                                          const auto tail = x.slice(extra - q, x.length());
                                          const auto e = residuals(fit_ols(tail, q), tail);
                                          const auto pairs = embed(e, 2).centered();
                                          out.push_back({pairs, pairs, pairs});
                                      }
                                      return out;
                                  }});
            }
        }
        break;
    }
    case Experiment::table4: {
        const auto orders = pick(cfg.orders, {5});
        for (auto p : orders) {
            const auto model = random_stable_var(3, p, cfg.var_radius, derive_seed(cfg.seed, {0x766172, p}));
            for (bool uni : both) {
                const auto spec = uni ? InnovationSpec::uniform(-2.0, 2.0, 3) : InnovationSpec::gaussian(3);
                groups.push_back({"VAR(" + std::to_string(p) + ") 3-D", uni ? "uniform" : "gaussian", {"projection"},
                                  [model, spec, n](std::uint64_t seed) {
                                      const auto x = simulate_var(model, n, spec, derive_seed(seed, {0})).centered();
                                      Inputs in;
                                      in.b2 = project(x, random_orthonormal_basis(3, 2, derive_seed(seed, {1})));
                                      in.b1 = project(x, random_orthonormal_basis(3, 1, derive_seed(seed, {2})));
                                      in.native = x;
                                      return std::vector<Inputs>{in};
                                  }});
            }
        }
        break;
    }
    case Experiment::table5: {
        const auto orders = pick(cfg.orders, {20});
        const auto fitted = pick(cfg.fitted_orders, {10});
        const std::size_t extra = *std::max_element(fitted.begin(), fitted.end());
        std::vector<std::string> names{"direct"};
        for (auto q : fitted) names.push_back(p_hat_name(q));
        for (auto p : orders) {
            const auto model = random_stable_var(3, p, cfg.var_radius, derive_seed(cfg.seed, {0x766172, p}));
            const auto spec = InnovationSpec::uniform(-2.0, 2.0, 3);
            groups.push_back({"VAR(" + std::to_string(p) + ") 3-D", "uniform", names,
                              [model, spec, n, fitted, extra](std::uint64_t seed) {
                                  const auto x = simulate_var(model, n + extra, spec, derive_seed(seed, {0}));
                                  const auto b2 = random_orthonormal_basis(3, 2, derive_seed(seed, {1}));
                                  const auto b1 = random_orthonormal_basis(3, 1, derive_seed(seed, {2}));
                                  auto inputs = [&](const MultiSeries& s) {
                                      const auto c = s.centered();
                                      return Inputs{project(c, b1), project(c, b2), c};
                                  };
                                  std::vector<Inputs> out{inputs(x.slice(extra, x.length()))};
                                  for (auto q : fitted) {
                                      const auto tail = x.slice(extra - q, x.length());
                                      out.push_back(inputs(residuals(fit_ols(tail, q), tail)));
                                  }
                                  return out;
                              }});
        }
        break;
    }
    case Experiment::change_demo:
        throw InvalidArgument("change_demo is not a rejection experiment");
    }
    return groups;
}

json moments_json(const NullMoments& m) {
    return {{"mean", m.mean}, {"variance", m.variance}, {"source", std::string(to_string(m.source))}};
}

json optional_json(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

double slope(const std::vector<TrajectoryRow>& rows, std::size_t begin, std::size_t end) {
    end = std::min(end, rows.size());
    if (end <= begin + 1) return 0.0;
    const double m = static_cast<double>(end - begin);
    double st = 0.0, ss = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
        st += static_cast<double>(t);
        ss += rows[t].cusum;
    }
    const double mt = st / m, ms = ss / m;
    double num = 0.0, den = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
        const double dt = static_cast<double>(t) - mt;
        num += dt * (rows[t].cusum - ms);
        den += dt * dt;
    }
    return num / den;
}

} // namespace

std::string_view to_string(Experiment id) noexcept {
    switch (id) {
    case Experiment::table1: return "table1";
    case Experiment::table2: return "table2";
    case Experiment::table3: return "table3";
    case Experiment::table4: return "table4";
    case Experiment::table5: return "table5";
    case Experiment::change_demo: return "change_demo";
    case Experiment::custom: return "custom";
    }
    return "unknown";
}

std::string_view to_string(TestKind test) noexcept {
    switch (test) {
    case TestKind::b1_iid: return "B1_iid";
    case TestKind::b1_colored: return "B1_colored";
    case TestKind::b2_colored: return "B2_colored";
    case TestKind::bd_iid: return "Bd_iid";
    }
    return "unknown";
}

Experiment parse_experiment(std::string_view name) {
    for (auto id : {Experiment::table1, Experiment::table2, Experiment::table3, Experiment::table4, Experiment::table5,
                    Experiment::change_demo, Experiment::custom})
        if (name == to_string(id)) return id;
    throw InvalidArgument("unknown experiment '" + std::string(name) + "'");
}

TestKind parse_test_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto t : {TestKind::b1_iid, TestKind::b1_colored, TestKind::b2_colored, TestKind::bd_iid}) {
        std::string ref(to_string(t));
        std::transform(ref.begin(), ref.end(), ref.begin(), [](unsigned char c) { return std::tolower(c); });
        if (lower == ref) return t;
    }
    throw InvalidArgument("unknown test '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
    if (simulations < 1) throw InvalidArgument("need at least one simulation");
    if (samples < 16) throw InvalidArgument("sample size must be at least 16");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
    if (tests.empty()) throw InvalidArgument("no tests selected");
    if (replicates < 2) throw InvalidArgument("bootstrap needs at least two replicates");
    if (!(cutoff > 0.0 && cutoff < 0.5)) throw InvalidArgument("cutoff must lie in (0, 0.5)");
    if (!(var_radius > 0.0 && var_radius < 1.0)) throw InvalidArgument("VAR radius must lie in (0, 1)");
    for (auto p : orders)
        if (p < 1) throw InvalidArgument("model orders must be positive");
    for (auto p : fitted_orders)
        if (p < 1 || p >= samples) throw InvalidArgument("fitted orders must lie in [1, N)");
    if (detector_order < 1) throw InvalidArgument("detector order must be positive");
}

double RejectionCell::rate() const noexcept {
    return simulations ? static_cast<double>(rejections) / static_cast<double>(simulations) : 0.0;
}

double RejectionCell::standard_error() const noexcept {
    if (simulations == 0) return 0.0;
    const double r = rate();
    return std::sqrt(r * (1.0 - r) / static_cast<double>(simulations));
}

const RejectionCell& RejectionReport::find(std::string_view protocol, std::string_view scenario,
                                           std::string_view distribution, TestKind test) const {
    for (const auto& c : cells)
        if (c.protocol == protocol && c.scenario == scenario && c.distribution == distribution && c.test == test)
            return c;
    throw InvalidArgument("no cell " + std::string(protocol) + " / " + std::string(scenario) + " / " +
                          std::string(distribution) + " / " + std::string(to_string(test)));
}

RejectionReport run_rejection_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto groups = build_groups(config);
    RejectionReport report{config.id, config, {}};

    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& group = groups[g];
        const std::size_t width = group.protocols.size() * config.tests.size();
        // per simulation: 0 = no reject, 1 = reject, 2 = failed
        std::vector<std::uint8_t> outcome(config.simulations * width, 0);
        std::vector<double> seconds(config.simulations * width, 0.0);

        parallel_for(config.simulations, config.threads, [&](std::size_t i) {
            const auto sim_seed = derive_seed(config.seed, {g, i});
            std::vector<Inputs> inputs;
            try {
                inputs = group.realize(sim_seed);
            } catch (const DataError&) {
                for (std::size_t c = 0; c < width; ++c) outcome[i * width + c] = 2;
                return;
            }
            for (std::size_t p = 0; p < group.protocols.size(); ++p) {
                for (std::size_t k = 0; k < config.tests.size(); ++k) {
                    const std::size_t c = p * config.tests.size() + k;
                    CalibrationConfig calib;
                    calib.replicates = config.replicates;
                    calib.seed = derive_seed(sim_seed, {0xB007, p});
                    calib.lags = config.lags;
                    const auto start = std::chrono::steady_clock::now();
                    try {
                        const auto r = evaluate(config.tests[k], input_for(config.tests[k], inputs[p]),
                                                config.alpha, config.lags, calib);
                        outcome[i * width + c] = r.verdict.reject ? 1 : 0;
                    } catch (const DataError&) {
                        outcome[i * width + c] = 2;
                    }
                    seconds[i * width + c] =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                }
            }
        });

        for (std::size_t p = 0; p < group.protocols.size(); ++p) {
            for (std::size_t k = 0; k < config.tests.size(); ++k) {
                const std::size_t c = p * config.tests.size() + k;
                RejectionCell cell{group.protocols[p], group.scenario, group.distribution, config.tests[k]};
                cell.simulations = config.simulations;
                for (std::size_t i = 0; i < config.simulations; ++i) {
                    const auto o = outcome[i * width + c];
                    cell.rejections += o == 1;
                    cell.failures += o == 2;
                    cell.runtime_seconds += seconds[i * width + c];
                }
                report.cells.push_back(std::move(cell));
            }
        }
    }
    return report;
}

std::string to_json(const RejectionReport& report, bool include_timing) {
    const auto& cfg = report.config;
    json tests = json::array();
    for (auto t : cfg.tests) tests.push_back(std::string(to_string(t)));
    json j{{"experiment", std::string(to_string(report.id))},
           {"config",
            {{"simulations", cfg.simulations},
             {"samples", cfg.samples},
             {"alpha", cfg.alpha},
             {"seed", cfg.seed},
             {"tests", tests},
             {"replicates", cfg.replicates},
             {"cutoff", cfg.cutoff},
             {"transition", cfg.shape.transition},
             {"floor", cfg.shape.floor},
             {"max_lag", cfg.lags.max_lag},
             {"min_correlation", cfg.lags.min_correlation}}}};
    json cells = json::array();
    for (const auto& c : report.cells) {
        json cell{{"protocol", c.protocol},       {"scenario", c.scenario},
                  {"distribution", c.distribution}, {"test", std::string(to_string(c.test))},
                  {"rejections", c.rejections},   {"simulations", c.simulations},
                  {"failures", c.failures},       {"rate", c.rate()},
                  {"standard_error", c.standard_error()}};
        if (include_timing) cell["runtime_seconds"] = c.runtime_seconds;
        cells.push_back(std::move(cell));
    }
    j["cells"] = std::move(cells);
    return j.dump(2);
}

DetectionSummary summarize_detection(const std::vector<TrajectoryRow>& rows, bool bivariate,
                                     std::size_t change_begin, std::size_t change_end, std::size_t min_run) {
    DetectionSummary s;
    auto monitoring = [&](const TrajectoryRow& r) { return bivariate ? r.monitoring_b2 : r.monitoring_b1; };
    auto reject = [&](const TrajectoryRow& r) { return bivariate ? r.reject_b2 : r.reject_b1; };

    s.monitor_start = rows.size();
    for (std::size_t t = 0; t < rows.size(); ++t)
        if (monitoring(rows[t])) {
            s.monitor_start = t;
            break;
        }
    std::size_t pre = 0, pre_total = 0;
    for (std::size_t t = s.monitor_start; t < std::min(change_begin, rows.size()); ++t) {
        ++pre_total;
        pre += reject(rows[t]);
    }
    s.pre_change_rejection_rate = pre_total ? static_cast<double>(pre) / static_cast<double>(pre_total) : 0.0;

    std::size_t run = 0, run_start = 0, in_change_run = 0;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (reject(rows[t])) {
            s.last_rejection = t;
            if (run == 0) run_start = t;
            ++run;
            if (!s.sustained_onset && run_start >= change_begin && run >= min_run) s.sustained_onset = run_start;
        } else {
            run = 0;
        }
        if (t >= change_begin && t < change_end) {
            in_change_run = reject(rows[t]) ? in_change_run + 1 : 0;
            s.longest_run_in_change = std::max(s.longest_run_in_change, in_change_run);
        }
    }
    return s;
}

CusumSummary summarize_cusum(const std::vector<TrajectoryRow>& rows, std::size_t change_begin,
                             std::size_t change_end, std::size_t skip) {
    CusumSummary c;
    c.slope_before = slope(rows, skip, change_begin);
    c.slope_during = slope(rows, change_begin, change_end);
    c.slope_after = slope(rows, change_end, rows.size());
    c.relative_slope_change = c.slope_before != 0.0
                                  ? std::abs(c.slope_during - c.slope_before) / std::abs(c.slope_before)
                                  : std::numeric_limits<double>::infinity();
    return c;
}

ChangeDemoResult run_change_demo(const ExperimentConfig& config) {
    config.validate();
    ChangeScenario scenario = ChangeScenario::standard();
    scenario.filter = design_lowpass_ar(5, config.cutoff, config.shape);
    const auto x = generate_change_scenario(scenario, derive_seed(config.seed, {0xC4A6}));

    DetectorConfig base;
    base.order = config.detector_order;
    base.lambda1 = config.lambda1;
    base.lambda2 = config.lambda2;
    base.lambda_cov = config.lambda_cov;
    base.alpha = config.alpha;
    base.delta = config.delta;
    base.lags = config.lags;
    DetectorConfig c1 = base;
    c1.dim = 1;
    c1.seed = derive_seed(config.seed, {1});
    DetectorConfig c2 = base;
    c2.dim = 2;
    c2.seed = derive_seed(config.seed, {2});
    Detector d1(c1);
    Detector d2(c2);
    CusumState cusum;

    ChangeDemoResult out;
    out.change_begin = scenario.change_begin;
    out.change_end = scenario.change_end;
    out.effective_window = c1.effective_window();
    out.rows.reserve(x.length());
    DetectorOutput last2;
    for (std::size_t t = 0; t < x.length(); ++t) {
        const auto o1 = d1.step(x.at(t));
        if (o1.residual) cusum_step(cusum, (*o1.residual)(0));
        if (t % 2 == 1) {
            Eigen::VectorXd pair(2);
            pair << x.values()(static_cast<Eigen::Index>(t - 1), 0), x.values()(static_cast<Eigen::Index>(t), 0);
            last2 = d2.step(pair);
        }
        TrajectoryRow row{};
        row.t = t;
        row.monitoring_b1 = o1.phase != Phase::warming_up;
        row.monitoring_b2 = last2.phase != Phase::warming_up;
        row.z_b1 = row.monitoring_b1 ? o1.verdict.z : 0.0;
        row.z_b2 = row.monitoring_b2 ? last2.verdict.z : 0.0;
        row.reject_b1 = row.monitoring_b1 && o1.verdict.reject;
        row.reject_b2 = row.monitoring_b2 && last2.verdict.reject;
        row.cusum = cusum.sum;
        out.rows.push_back(row);
    }
    out.critical = two_sided_critical(config.alpha);
    out.b1 = summarize_detection(out.rows, false, out.change_begin, out.change_end);
    out.b2 = summarize_detection(out.rows, true, out.change_begin, out.change_end);
    out.cusum = summarize_cusum(out.rows, out.change_begin, out.change_end, out.b1.monitor_start);
    return out;
}

void write_trajectory_csv(std::ostream& os, const ChangeDemoResult& r) {
    os << "t,z_B1,z_B2,s_cusum,crit_lo,crit_hi,in_change\n";
    os << std::setprecision(10);
    for (const auto& row : r.rows) {
        const bool in_change = row.t >= r.change_begin && row.t < r.change_end;
        os << row.t << ',' << row.z_b1 << ',' << row.z_b2 << ',' << row.cusum << ',' << -r.critical << ','
           << r.critical << ',' << (in_change ? 1 : 0) << '\n';
    }
}

std::string to_json(const ChangeDemoResult& r) {
    auto det = [](const DetectionSummary& s) {
        return json{{"monitor_start", s.monitor_start},
                    {"pre_change_rejection_rate", s.pre_change_rejection_rate},
                    {"sustained_onset", optional_json(s.sustained_onset)},
                    {"last_rejection", optional_json(s.last_rejection)},
                    {"longest_run_in_change", s.longest_run_in_change}};
    };
    const json j{{"change_begin", r.change_begin},
                 {"change_end", r.change_end},
                 {"critical", r.critical},
                 {"effective_window", r.effective_window},
                 {"B1", det(r.b1)},
                 {"B2", det(r.b2)},
                 {"cusum",
                  {{"slope_before", r.cusum.slope_before},
                   {"slope_during", r.cusum.slope_during},
                   {"slope_after", r.cusum.slope_after},
                   {"relative_slope_change", r.cusum.relative_slope_change}}}};
    return j.dump(2);
}

SeriesTestReport test_series(const MultiSeries& series, const std::vector<TestKind>& tests, double alpha,
                             const LagPolicy& lags, const CalibrationConfig& calib) {
    if (tests.empty()) throw InvalidArgument("no tests selected");
    const auto centered = series.centered();
    SeriesTestReport report{series.length(), series.dim(), {}};
    for (auto t : tests) report.entries.push_back(evaluate(t, centered, alpha, lags, calib));
    return report;
}

SeriesTestReport test_csv(const std::string& path, std::size_t dim, const std::vector<TestKind>& tests, double alpha,
                          const LagPolicy& lags) {
    CalibrationConfig calib;
    calib.lags = lags;
    return test_series(read_csv_file(path, dim), tests, alpha, lags, calib);
}

std::string to_json(const SeriesTestReport& report) {
    json entries = json::array();
    for (const auto& e : report.entries)
        entries.push_back({{"test", std::string(to_string(e.test))},
                           {"statistic", e.statistic},
                           {"moments", moments_json(e.moments)},
                           {"z", e.verdict.z},
                           {"p_value", e.verdict.p_value},
                           {"reject", e.verdict.reject},
                           {"alpha", e.verdict.alpha}});
    const json j{{"length", report.length}, {"dim", report.dim}, {"tests", entries}};
    return j.dump(2);
}

} // namespace mkt
