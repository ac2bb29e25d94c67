#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mkt/errors.hpp"
#include "mkt/simulation.hpp"
#include "mkt/stats.hpp"
#include "oracles.hpp"

using namespace mkt;

TEST_CASE("Levinson-Durbin on an AR(1) autocovariance") {
    const double rho = 0.7;
    std::vector<double> r;
    for (int k = 0; k <= 3; ++k) r.push_back(std::pow(rho, k) / (1 - rho * rho));
    const auto lev = levinson_durbin(r, 3);
    CHECK(lev.coeffs[0] == doctest::Approx(rho));
    CHECK(std::abs(lev.coeffs[1]) < 1e-12);
    CHECK(lev.innovation_variance == doctest::Approx(1.0));
    CHECK(lev.reflection[0] == doctest::Approx(rho));
    CHECK_THROWS_AS(levinson_durbin({1.0, 1.0, 1.0}, 2), DesignFailure);
    CHECK_THROWS_AS(levinson_durbin({1.0}, 2), InvalidArgument);
}

TEST_CASE("low-pass reference autocovariance") {
    // flat spectrum (floor = 1 would be white); check r(0) = 2 * integral of P
    LowpassShape shape{0.05, 0.01};
    const auto r = lowpass_autocovariance(3, 0.25, shape);
    // pass band 0..0.225 plus half the roll-off plus the floor elsewhere
    const double area = 0.225 + 0.5 * 0.05;
    CHECK(r[0] == doctest::Approx(2.0 * (0.01 * 0.5 + 0.99 * area)).epsilon(1e-6));
    CHECK_THROWS_AS(lowpass_autocovariance(3, 0.6), InvalidArgument);
    CHECK_THROWS_AS(lowpass_autocovariance(3, 0.49, {0.05, 0.01}), InvalidArgument);
}

TEST_CASE("designed AR reproduces the reference autocovariance at lags 0..p") {
    for (std::size_t p : {4, 14, 20}) {
        const auto r = lowpass_autocovariance(p, 0.25);
        const auto lev = levinson_durbin(r, p);
        const auto model = design_lowpass_ar(p, 0.25);
        REQUIRE(model.is_stable());
        std::vector<double> a;
        for (std::size_t k = 1; k <= p; ++k) a.push_back(model.coeff(k)(0, 0));
        const auto oracle_r = oracle::ar_autocovariance(a, lev.innovation_variance, static_cast<int>(p), 20000);
        for (std::size_t k = 0; k <= p; ++k) CHECK(std::abs(oracle_r[k] - r[k]) < 1e-8);
    }
}

TEST_CASE("designed AR is low-pass") {
    for (std::size_t p : {4, 5, 14, 20}) {
        const auto model = design_lowpass_ar(p, 0.25);
        double peak = 0.0;
        for (double f = 0.0; f <= 0.5; f += 0.001) peak = std::max(peak, ar_power_spectrum(model, f));
        for (double f = 0.35; f <= 0.5; f += 0.001)
            CHECK(10.0 * std::log10(ar_power_spectrum(model, f) / peak) <= -10.0);
    }
}

TEST_CASE("innovation specs") {
    CHECK(InnovationSpec::unit_uniform().variance() == doctest::Approx(1.0));
    CHECK(InnovationSpec::uniform(-2, 2).variance() == doctest::Approx(4.0 / 3.0));
    CHECK_THROWS_AS(InnovationSpec::uniform(-1, 2), InvalidArgument);
    CHECK_THROWS_AS(InnovationSpec::uniform(1, -1), InvalidArgument);
    const auto x = simulate_var(VarModel::zeros(1, 1), 50000, InnovationSpec::unit_uniform(), 3);
    CHECK(x.values().array().abs().maxCoeff() <= std::sqrt(3.0));
    CHECK(multivariate_kurtosis(x) == doctest::Approx(1.8).epsilon(0.02));
}

TEST_CASE("simulation is deterministic per seed and refuses unstable models") {
    const auto m = design_lowpass_ar(4, 0.25);
    const auto a = simulate_var(m, 500, InnovationSpec::gaussian(), 9);
    const auto b = simulate_var(m, 500, InnovationSpec::gaussian(), 9);
    const auto c = simulate_var(m, 500, InnovationSpec::gaussian(), 10);
    CHECK(a.values() == b.values());
    CHECK(a.values() != c.values());
    CHECK_THROWS_AS(simulate_var(VarModel::scalar({1.01}), 10, InnovationSpec::gaussian(), 1), InvalidArgument);
    CHECK_THROWS_AS(simulate_var(m, 10, InnovationSpec::gaussian(2), 1), InvalidArgument);
}

TEST_CASE("simulated AR has the designed autocovariance") {
    const auto m = design_lowpass_ar(4, 0.25);
    const auto r = lowpass_autocovariance(4, 0.25);
    const double sigma2 = levinson_durbin(r, 4).innovation_variance;
    const auto x = simulate_var(m, 200000, InnovationSpec::gaussian(), 5);
    const auto cov = sample_lag_covariance(x, 2);
    for (int k = 0; k <= 2; ++k) CHECK(cov.at(k)(0, 0) == doctest::Approx(r[k] / sigma2).epsilon(0.03));
}

TEST_CASE("random stable VAR has the requested spectral radius") {
    const auto m = random_stable_var(3, 5, 0.9, 42);
    CHECK(m.spectral_radius() == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(random_stable_var(3, 5, 0.9, 42).stacked() == m.stacked());
    CHECK_THROWS_AS(random_stable_var(3, 5, 1.0, 42), InvalidArgument);
}

TEST_CASE("embedding blocks consecutive samples") {
    const auto x = MultiSeries::from_rows({{0}, {1}, {2}, {3}, {4}, {5}, {6}});
    const auto y = embed(x, 2);
    CHECK(y.length() == 3);
    CHECK(y.values()(0, 0) == 0);
    CHECK(y.values()(0, 1) == 1);
    CHECK(y.values()(2, 1) == 5);
    CHECK_THROWS_AS(embed(y, 2), InvalidArgument);
}

TEST_CASE("projections") {
    const auto q = random_orthonormal_basis(3, 2, 7);
    CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(random_orthonormal_basis(3, 2, 7) == q);
    const auto x = simulate_var(random_stable_var(3, 2, 0.5, 1), 100, InnovationSpec::gaussian(3), 2);
    const auto y = project(x, q);
    CHECK(y.dim() == 2);
    CHECK((y.values() - x.values() * q).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(random_projection(x, 3, 1), InvalidArgument);
    CHECK(random_projection(x, 1, 1).dim() == 1);
}

TEST_CASE("change scenario keeps the variance and switches the tails") {
    const auto sc = ChangeScenario::standard();
    CHECK(sc.change_begin == 5000);
    CHECK(sc.change_end == 10000);
    CHECK(sc.length == 15000);
    const auto x = generate_change_scenario(sc, 3);
    CHECK(x.length() == 15000);
    const auto before = x.slice(0, 5000);
    const auto during = x.slice(5000, 10000);
    const double ratio = during.centered().values().squaredNorm() / before.centered().values().squaredNorm();
    CHECK(std::abs(ratio - 1.0) < 0.1);
    ChangeScenario bad = sc;
    bad.change_end = 20000;
    CHECK_THROWS_AS(generate_change_scenario(bad, 1), InvalidArgument);
}

TEST_CASE("zero model gives white output and AR(1) has the right lag-1 correlation") {
    const auto w = simulate_var(VarModel::zeros(1, 1), 100000, InnovationSpec::gaussian(), 31);
    const auto cw = sample_lag_covariance(w, 1);
    CHECK(std::abs(cw.at(1)(0, 0)) < 0.02);

    const auto x = simulate_var(VarModel::scalar({0.7}), 100000, InnovationSpec::gaussian(), 32);
    const auto cx = sample_lag_covariance(x.centered(), 1);
    CHECK(std::abs(cx.normalized(1)(0, 0) - 0.7) < 0.02);
}

TEST_CASE("uniform innovations have the nominal variance") {
    const auto x = simulate_var(VarModel::zeros(1, 1), 100000, InnovationSpec::uniform(-2, 2), 33);
    const double var = x.centered().values().squaredNorm() / 100000.0;
    CHECK(std::abs(var / (16.0 / 12.0) - 1.0) < 0.02);
}

TEST_CASE("1-D projection of an isotropic Gaussian stream stays standard normal") {
    const auto x = simulate_var(VarModel::zeros(3, 1), 10000, InnovationSpec::gaussian(3), 34);
    const auto y = random_projection(x, 1, 35);
    std::vector<double> v(y.values().data(), y.values().data() + y.length());
    std::sort(v.begin(), v.end());
    double ks = 0.0;
    const double n = static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = normal_cdf(v[i]);
        ks = std::max({ks, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    CHECK(ks < 0.05);
}
