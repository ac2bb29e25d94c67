#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mkt/csv.hpp"
#include "mkt/detector.hpp"
#include "mkt/errors.hpp"
#include "mkt/experiments.hpp"
#include "mkt/simulation.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_data = 3;

std::vector<mkt::TestKind> parse_tests(const std::vector<std::string>& names) {
    std::vector<mkt::TestKind> out;
    for (const auto& n : names) out.push_back(mkt::parse_test_kind(n));
    return out;
}

// "-" or empty means stdout
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw mkt::InvalidArgument("cannot write " + path);
    out << text << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kurtosis-based normality testing for colored data"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Write a simulated low-pass AR series as CSV");
    std::size_t sim_p = 4, sim_n = 1000, sim_embed = 1;
    std::string sim_dist = "gaussian", sim_out;
    std::uint64_t sim_seed = 1;
    double sim_cutoff = 0.25;
    bool sim_change = false;
    sim->add_option("--p", sim_p, "AR model order")->check(CLI::PositiveNumber);
    sim->add_option("--N", sim_n, "Number of samples (scalar)")->check(CLI::PositiveNumber);
    sim->add_option("--dist", sim_dist, "Innovations: gaussian | uniform")->check(CLI::IsMember({"gaussian", "uniform"}));
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--cutoff", sim_cutoff, "Low-pass cutoff in cycles/sample");
    sim->add_option("--embed", sim_embed, "Block the scalar series into d-vectors")->check(CLI::PositiveNumber);
    sim->add_flag("--change", sim_change, "Generate the standard change scenario instead");
    sim->add_option("--out", sim_out, "Output CSV (default stdout)");

    // test
    auto* tst = app.add_subcommand("test", "Test a CSV series for Gaussianity");
    std::string tst_in, tst_out;
    std::size_t tst_dim = 0, tst_tau = 50;
    double tst_alpha = 0.05;
    std::vector<std::string> tst_tests{"B1_iid", "B1_colored"};
    tst->add_option("input", tst_in, "CSV file")->required();
    tst->add_option("--dim", tst_dim, "Expected number of columns (0 = any)");
    tst->add_option("--tests", tst_tests, "Tests: B1_iid B1_colored B2_colored Bd_iid")->delimiter(',');
    tst->add_option("--alpha", tst_alpha, "Significance level");
    tst->add_option("--tau-max", tst_tau, "Largest lag in the colored corrections");
    tst->add_option("--out", tst_out, "Output JSON (default stdout)");

    // bench
    auto* bench = app.add_subcommand("bench", "Monte Carlo rejection rates for a table protocol");
    std::string bench_id, bench_out;
    mkt::ExperimentConfig cfg;
    bool bench_full = false, bench_timing = false;
    std::vector<std::string> bench_tests;
    bench->add_option("experiment", bench_id, "table1 .. table5 or custom")->required();
    bench->add_option("--M", cfg.simulations, "Simulations per cell");
    bench->add_option("--N", cfg.samples, "Samples per series (pairs for the embedded tables)");
    bench->add_option("--alpha", cfg.alpha, "Significance level");
    bench->add_option("--seed", cfg.seed, "Master seed");
    bench->add_option("--p", cfg.orders, "True model orders")->delimiter(',');
    bench->add_option("--p-hat", cfg.fitted_orders, "Fitted orders for residual protocols")->delimiter(',');
    bench->add_option("--cutoff", cfg.cutoff, "Low-pass cutoff in cycles/sample");
    bench->add_option("--tau-max", cfg.lags.max_lag, "Largest lag in the colored corrections");
    bench->add_option("--replicates", cfg.replicates, "Bootstrap replicates for B2");
    bench->add_option("--tests", bench_tests, "Tests to run")->delimiter(',');
    bench->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
    bench->add_flag("--full", bench_full, "Use M = 2000");
    bench->add_flag("--timing", bench_timing, "Include per-cell runtime in the report");
    bench->add_option("--out", bench_out, "Output JSON (default stdout)");

    // detect
    auto* det = app.add_subcommand("detect", "Online change detection");
    std::string det_in, det_out, det_summary;
    mkt::ExperimentConfig dcfg;
    dcfg.id = mkt::Experiment::change_demo;
    double lambda_cov = 0.0;
    det->add_option("--in", det_in, "CSV series; without it the standard change scenario is run");
    det->add_option("--p", dcfg.detector_order, "RLS predictor order");
    det->add_option("--lambda1", dcfg.lambda1, "RLS forgetting factor");
    det->add_option("--lambda2", dcfg.lambda2, "Kurtosis forgetting factor");
    det->add_option("--lambda-cov", lambda_cov, "Residual covariance forgetting factor (default lambda1)");
    det->add_option("--alpha", dcfg.alpha, "Significance level");
    det->add_option("--seed", dcfg.seed, "Master seed");
    det->add_option("--tau-max", dcfg.lags.max_lag, "Largest tracked residual lag");
    det->add_option("--out", det_out, "Trajectory CSV, or JSON lines with --in (default stdout)");
    det->add_option("--summary", det_summary, "Summary JSON for the change scenario");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*sim) {
            mkt::MultiSeries x = [&] {
                if (sim_change) return mkt::generate_change_scenario(mkt::ChangeScenario::standard(), sim_seed);
                const auto model = mkt::design_lowpass_ar(sim_p, sim_cutoff);
                const auto spec = sim_dist == "uniform" ? mkt::InnovationSpec::unit_uniform() : mkt::InnovationSpec::gaussian();
                return mkt::simulate_var(model, sim_n, spec, sim_seed);
            }();
            if (sim_embed > 1) x = mkt::embed(x, sim_embed);
            std::ostringstream os;
            mkt::write_csv(os, x);
            emit(sim_out, os.str());
        } else if (*tst) {
            mkt::LagPolicy lags;
            lags.max_lag = tst_tau;
            const auto series = mkt::read_csv_file(tst_in, tst_dim ? std::optional<std::size_t>(tst_dim) : std::nullopt);
            mkt::CalibrationConfig calib;
            calib.lags = lags;
            const auto report = mkt::test_series(series, parse_tests(tst_tests), tst_alpha, lags, calib);
            emit(tst_out, mkt::to_json(report));
        } else if (*bench) {
            cfg.id = mkt::parse_experiment(bench_id);
            if (bench_full) cfg.use_full_scale();
            if (!bench_tests.empty()) cfg.tests = parse_tests(bench_tests);
            const auto report = mkt::run_rejection_experiment(cfg);
            emit(bench_out, mkt::to_json(report, bench_timing));
        } else if (*det) {
            if (lambda_cov > 0.0) dcfg.lambda_cov = lambda_cov;
            if (det_in.empty()) {
                const auto result = mkt::run_change_demo(dcfg);
                std::ostringstream os;
                mkt::write_trajectory_csv(os, result);
                emit(det_out, os.str());
                if (!det_summary.empty()) emit(det_summary, mkt::to_json(result));
            } else {
                const auto series = mkt::read_csv_file(det_in);
                mkt::DetectorConfig dc;
                dc.dim = series.dim();
                dc.order = dcfg.detector_order;
                dc.lambda1 = dcfg.lambda1;
                dc.lambda2 = dcfg.lambda2;
                dc.lambda_cov = dcfg.lambda_cov;
                dc.alpha = dcfg.alpha;
                dc.lags = dcfg.lags;
                dc.seed = dcfg.seed;
                if (dc.dim > 2) dc.moments = mkt::MomentMode::iid;
                mkt::Detector detector(dc);
                mkt::CusumState cusum;
                std::ostringstream os;
                for (std::size_t t = 0; t < series.length(); ++t) {
                    const auto o = detector.step(series.at(t));
                    if (o.residual) mkt::cusum_step(cusum, (*o.residual)(0));
                    os << mkt::to_json_line({o.t, o.verdict.z, o.verdict.p_value, o.alarm(), o.statistic, cusum.sum})
                       << '\n';
                }
                emit(det_out, os.str());
            }
        }
    } catch (const mkt::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const mkt::DesignFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const mkt::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    }
    return 0;
}
