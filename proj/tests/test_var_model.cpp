#include <doctest.h>

#include <random>

#include "mkt/errors.hpp"
#include "mkt/simulation.hpp"
#include "mkt/stats.hpp"
#include "mkt/var_model.hpp"
#include "oracles.hpp"

using namespace mkt;

namespace {

VarModel bivariate_var2() {
    Eigen::MatrixXd a1(2, 2), a2(2, 2);
    a1 << 0.5, 0.1, -0.2, 0.3;
    a2 << -0.2, 0.0, 0.1, 0.1;
    return VarModel(2, {a1, a2});
}

} // namespace

TEST_CASE("VAR model basics") {
    const auto m = bivariate_var2();
    CHECK(m.dim() == 2);
    CHECK(m.order() == 2);
    CHECK(m.stacked().cols() == 4);
    CHECK(m.companion().rows() == 4);
    CHECK(m.is_stable());
    CHECK(VarModel::scalar({1.2}).spectral_radius() == doctest::Approx(1.2));
    CHECK_FALSE(VarModel::scalar({1.2}).is_stable());
    CHECK_THROWS_AS(VarModel(2, {}), InvalidArgument);
    CHECK_THROWS_AS(VarModel(2, {Eigen::MatrixXd::Zero(3, 3)}), InvalidArgument);
}

TEST_CASE("residuals of the true model are the innovations") {
    const auto m = bivariate_var2();
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    Eigen::MatrixXd e(300, 2), x = Eigen::MatrixXd::Zero(300, 2);
    for (int t = 0; t < 300; ++t) {
        e.row(t) << g(rng), g(rng);
        x.row(t) = e.row(t);
        if (t >= 1) x.row(t) += x.row(t - 1) * m.coeff(1).transpose();
        if (t >= 2) x.row(t) += x.row(t - 2) * m.coeff(2).transpose();
    }
    const auto r = residuals(m, MultiSeries(x));
    CHECK(r.length() == 298);
    CHECK((r.values() - e.bottomRows(298)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("OLS fit matches the normal-equation oracle and recovers coefficients") {
    const auto m = bivariate_var2();
    const auto x = simulate_var(m, 20000, InnovationSpec::gaussian(2), 8);
    const auto fit = fit_ols(x, 2);
    const Eigen::MatrixXd w = oracle::ols_weights(x.values(), 2);
    CHECK((fit.stacked().transpose() - w).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((fit.coeff(1) - m.coeff(1)).cwiseAbs().maxCoeff() < 0.05);
    CHECK((fit.coeff(2) - m.coeff(2)).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("OLS rank deficiency and argument checks") {
    CHECK_THROWS_AS(fit_ols(MultiSeries(Eigen::MatrixXd::Zero(100, 1)), 2), RankDeficiency);
    CHECK_THROWS_AS(fit_ols(MultiSeries(Eigen::MatrixXd::Ones(3, 1)), 2), InvalidArgument);
    CHECK_THROWS_AS(residuals(VarModel::scalar({0.5}), MultiSeries(Eigen::MatrixXd::Ones(1, 1))), InvalidArgument);
}

TEST_CASE("Yule-Walker recovers a scalar AR(2) from its exact autocovariance") {
    const std::vector<double> a{0.6, -0.3};
    const auto r = oracle::ar_autocovariance(a, 1.0, 5, 400);
    std::vector<Eigen::MatrixXd> mats;
    for (double v : r) mats.push_back(Eigen::MatrixXd::Constant(1, 1, v));
    const auto fit = fit_yule_walker(LagCovariance(mats), 2);
    CHECK(fit.model.coeff(1)(0, 0) == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(fit.model.coeff(2)(0, 0) == doctest::Approx(-0.3).epsilon(1e-9));
    CHECK(fit.innovation_cov(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    // higher order: trailing coefficients vanish
    const auto fit4 = fit_yule_walker(LagCovariance(mats), 4);
    CHECK(std::abs(fit4.model.coeff(4)(0, 0)) < 1e-9);
}

TEST_CASE("RLS initial state") {
    const auto s = rls_init(2, 5, 0.99, 1.0);
    CHECK(s.gram_inv().isApprox(Eigen::MatrixXd::Identity(10, 10)));
    CHECK(s.weights().isZero());
    CHECK_FALSE(s.warmed_up());
    CHECK_THROWS_AS(rls_init(1, 1, 0.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(rls_init(1, 1, 0.5, 0.0), InvalidArgument);
}

TEST_CASE("RLS: warm-up and first residual") {
    RlsState s(1, 2, 0.99, 1.0);
    Eigen::VectorXd x(1);
    x << 1.0;
    CHECK_FALSE(s.push(x).has_value());
    x << 2.0;
    CHECK_FALSE(s.push(x).has_value());
    CHECK(s.warmed_up());
    x << 3.5;
    const auto e = s.push(x);
    REQUIRE(e.has_value());
    // zero predictor: first residual is the observation itself
    CHECK((*e)(0) == doctest::Approx(3.5));
    CHECK(s.updates() == 1);
}

TEST_CASE("RLS with lambda = 1 matches batch OLS") {
    const auto m = bivariate_var2();
    const auto x = simulate_var(m, 3000, InnovationSpec::gaussian(2), 12);
    RlsState s(2, 2, 1.0, 1e-8);
    for (std::size_t t = 0; t < x.length(); ++t) s.push(x.at(t));
    const Eigen::MatrixXd w = oracle::ols_weights(x.values(), 2);
    CHECK((s.weights() - w).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("RLS inverse Gram matrix matches an explicit shadow") {
    const auto x = simulate_var(bivariate_var2(), 1500, InnovationSpec::gaussian(2), 13);
    const double lambda = 0.99, delta = 1.0;
    RlsState s(2, 3, lambda, delta);
    Eigen::MatrixXd gram = delta * Eigen::MatrixXd::Identity(6, 6);
    for (std::size_t t = 0; t < x.length(); ++t) {
        if (s.warmed_up()) {
            const Eigen::VectorXd z = s.regressor();
            gram = lambda * gram + z * z.transpose();
        }
        s.push(x.at(t));
        if (t % 100 == 99) {
            const Eigen::MatrixXd inv = gram.inverse();
            CHECK((s.gram_inv() - inv).cwiseAbs().maxCoeff() / inv.cwiseAbs().maxCoeff() < 1e-6);
            CHECK((s.gram_inv() - s.gram_inv().transpose()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("RLS tracks a stationary model") {
    const auto m = bivariate_var2();
    const auto x = simulate_var(m, 5000, InnovationSpec::gaussian(2), 14);
    RlsState s(2, 2, 0.99, 1.0);
    for (std::size_t t = 0; t < x.length(); ++t) s.push(x.at(t));
    const auto est = s.model();
    CHECK((est.coeff(1) - m.coeff(1)).cwiseAbs().maxCoeff() < 0.35);
}

TEST_CASE("RLS rejects non-finite input and keeps its state") {
    RlsState s(1, 1, 0.99, 1.0);
    Eigen::VectorXd x(1);
    x << 1.0;
    s.push(x);
    s.push(x);
    const Eigen::MatrixXd before = s.weights();
    x << std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(s.push(x), InvalidData);
    CHECK(s.weights() == before);
    x << 1e300;
    try {
        s.push(x);
    } catch (const NumericOverflow&) {
    }
    const Eigen::MatrixXd held = s.weights();
    const Eigen::MatrixXd held_inv = s.gram_inv();
    x << 1.0;
    CHECK_THROWS_AS(s.push(x), NumericOverflow);
    CHECK(s.weights() == held);
    CHECK(s.gram_inv() == held_inv);
}

TEST_CASE("VAR model JSON round trip and errors") {
    const VarModelRecord rec{bivariate_var2(), 0.99, 1.0};
    const auto text = to_json(rec);
    const auto back = var_model_from_json(text);
    CHECK(back.model.stacked() == rec.model.stacked());
    CHECK(back.lambda1 == 0.99);
    CHECK_THROWS_AS(var_model_from_json("{not json"), ParseError);
    CHECK_THROWS_AS(var_model_from_json(R"({"d": 2, "p": 1})"), SchemaError);
    CHECK_THROWS_AS(var_model_from_json(R"({"d": 1, "p": 2, "A": [[0.5]], "lambda1": 1, "delta": 1})"), SchemaError);
}

TEST_CASE("OLS on a noiseless AR(1) recursion") {
    std::vector<double> v{1.0};
    for (int i = 1; i < 40; ++i) v.push_back(0.7 * v.back());
    const auto m = fit_ols(MultiSeries::from_scalar(v), 1);
    CHECK(std::abs(m.coeff(1)(0, 0) - 0.7) < 1e-10);
}
