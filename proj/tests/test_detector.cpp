#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "mkt/detector.hpp"
#include "mkt/errors.hpp"
#include "mkt/simulation.hpp"

using namespace mkt;

namespace {

Eigen::VectorXd draw(std::mt19937_64& rng, std::size_t d) {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    for (auto& x : v) x = g(rng);
    return v;
}

} // namespace

TEST_CASE("detector configuration") {
    DetectorConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.effective_window() == doctest::Approx(1000.0));
    CHECK(c.covariance_factor() == 0.99);
    c.lambda_cov = 0.998;
    CHECK(c.covariance_factor() == 0.998);
    DetectorConfig bad;
    bad.lambda2 = 1.2;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = DetectorConfig{};
    bad.dim = 3;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad.moments = MomentMode::iid;
    CHECK_NOTHROW(bad.validate());
    DetectorConfig two;
    two.dim = 2;
    const Detector d(two);
    CHECK(d.residual_cov().isApprox(Eigen::MatrixXd::Identity(2, 2)));
    CHECK(d.rls().gram_inv().isApprox(Eigen::MatrixXd::Identity(10, 10)));
}

TEST_CASE("no alarms during warm-up") {
    DetectorConfig c;
    Detector d(c);
    std::mt19937_64 rng(1);
    for (std::size_t t = 1; t < c.warmup_length(); ++t) {
        const auto out = d.step(10.0 * draw(rng, 1).array().cube().matrix());
        CHECK(out.phase == Phase::warming_up);
        CHECK_FALSE(out.alarm());
    }
    const auto out = d.step(draw(rng, 1));
    CHECK(out.phase == Phase::monitoring);
}

TEST_CASE("tracker on an i.i.d. bivariate Gaussian stream converges near 8") {
    DetectorConfig c;
    c.dim = 2;
    c.moments = MomentMode::iid;
    Detector d(c);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10000 + static_cast<int>(c.warmup_length()); ++t) d.step(draw(rng, 2));
    CHECK(d.statistic() >= 7.5);
    CHECK(d.statistic() <= 8.5);
}

TEST_CASE("tracker null calibration against a second-order expansion") {
    // q = e^2 / (lambda V + (1 - lambda) e^2): E q^2 ~ 3 - 24c + 9 lambda^2 s^2 + 234 c^2
    const double lc = 0.99, c = 1 - lc, s2 = 2 * c / (1 + lc);
    const double approx = 3 - 24 * c + 9 * lc * lc * s2 + 234 * c * c;
    const auto [mean, var] = tracker_null_moments(1, lc, 0.998);
    CHECK(mean == doctest::Approx(approx).epsilon(0.01));
    CHECK(var > 0.0);
    CHECK(tracker_null_moments(1, lc, 0.998).first == mean);
}

TEST_CASE("per-step false alarms on white Gaussian streams stay within [alpha/2, 2 alpha]") {
    for (std::size_t dim : {1, 2}) {
        DetectorConfig c;
        c.dim = dim;
        c.moments = MomentMode::iid;
        double alarms = 0, steps = 0;
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            Detector d(c);
            std::mt19937_64 rng(50 + seed);
            for (int t = 0; t < 12000; ++t) {
                const auto out = d.step(draw(rng, dim));
                if (out.phase == Phase::monitoring) {
                    alarms += out.alarm();
                    steps += 1;
                }
            }
        }
        const double rate = alarms / steps;
        CHECK(rate >= 0.025);
        CHECK(rate <= 0.1);
    }
}

TEST_CASE("degenerate residual streams hold the verdict") {
    DetectorConfig c;
    Detector d(c);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    DetectorOutput out;
    for (int t = 0; t < 2000; ++t) out = d.step(zero);
    CHECK(out.phase == Phase::degenerate);
    CHECK(d.degenerate());
    CHECK_FALSE(out.alarm());
    CHECK_THROWS_AS(d.step(Eigen::VectorXd::Constant(1, NAN)), InvalidData);
    CHECK_THROWS_AS(d.step(Eigen::VectorXd::Zero(2)), InvalidArgument);
}

TEST_CASE("detector flags the change scenario") {
    const auto x = generate_change_scenario(ChangeScenario::standard(), 11);
    DetectorConfig c;
    Detector d(c);
    std::size_t in_change = 0, in_change_steps = 0;
    for (std::size_t t = 0; t < x.length(); ++t) {
        const auto out = d.step(x.at(t));
        if (t >= 6500 && t < 10000) {
            in_change += out.alarm();
            ++in_change_steps;
        }
    }
    CHECK(static_cast<double>(in_change) / static_cast<double>(in_change_steps) > 0.8);
}

TEST_CASE("detector is deterministic") {
    const auto x = generate_change_scenario(ChangeScenario::standard(), 12);
    DetectorConfig c;
    c.dim = 2;
    auto run = [&] {
        Detector d(c);
        std::vector<double> z;
        for (std::size_t t = 1; t < 6000; t += 2) {
            Eigen::VectorXd v(2);
            v << x.values()(t - 1, 0), x.values()(t, 0);
            z.push_back(d.step(v).verdict.z);
        }
        return z;
    };
    CHECK(run() == run());
}

TEST_CASE("CUSUM log-likelihood ratio") {
    const double l0 = -std::log(2.0 * std::sqrt(3.0)) + 0.5 * std::log(2.0 * M_PI);
    CHECK(cusum_log_likelihood_ratio(0.0) == doctest::Approx(-0.3236).epsilon(1e-3));
    CHECK(cusum_log_likelihood_ratio(0.0) == doctest::Approx(l0));
    CHECK(cusum_log_likelihood_ratio(std::sqrt(4 * 0.3236)) == doctest::Approx(0.3236).epsilon(1e-3));
    CusumState s;
    cusum_step(s, 0.0);
    cusum_step(s, 1.0);
    CHECK(s.steps == 2);
    CHECK(s.sum == doctest::Approx(2 * l0 + 0.5));
    CHECK_THROWS_AS(cusum_step(s, NAN), InvalidData);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    CusumState drift;
    for (int t = 0; t < 100000; ++t) cusum_step(drift, g(rng));
    CHECK(drift.sum / 100000.0 == doctest::Approx(0.1764).epsilon(0.03));
}

TEST_CASE("verdict records serialize as one JSON line") {
    const auto line = to_json_line({7, 2.5, 0.0124, true, 3.4, -1.0});
    CHECK(line.find('\n') == std::string::npos);
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"t", "z", "p_value", "reject", "B", "s_cusum"}) CHECK(j.contains(key));
    CHECK(j["t"] == 7);
    CHECK(j["reject"] == true);
}
