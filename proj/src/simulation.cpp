#include "mkt/simulation.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "mkt/errors.hpp"

namespace mkt {
namespace {

void draw_innovations(const InnovationSpec& spec, Rng& rng, double* out, std::size_t count) {
    if (spec.kind == InnovationSpec::Kind::gaussian_std) {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (std::size_t i = 0; i < count; ++i) out[i] = dist(rng);
    } else {
        std::uniform_real_distribution<double> dist(spec.lower, spec.upper);
        for (std::size_t i = 0; i < count; ++i) out[i] = dist(rng);
    }
}

// Row-major coefficient layout for the inner loops: a[((k * d) + i) * d + j] = A_{k+1}(i, j).
std::vector<double> flatten(const VarModel& model) {
    const auto d = model.dim();
    std::vector<double> a(model.order() * d * d);
    for (std::size_t k = 0; k < model.order(); ++k)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                a[(k * d + i) * d + j] = model.coeff(k + 1)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return a;
}

template <std::size_t D>
void run_fixed(const std::vector<double>& a, std::size_t p, std::vector<double>& x) {
    const std::size_t total = x.size() / D;
    for (std::size_t t = 0; t < total; ++t) {
        double acc[D] = {};
        const std::size_t lags = std::min(p, t);
        for (std::size_t k = 1; k <= lags; ++k) {
            const double* past = &x[(t - k) * D];
            const double* ak = &a[(k - 1) * D * D];
            for (std::size_t i = 0; i < D; ++i)
                for (std::size_t j = 0; j < D; ++j) acc[i] += ak[i * D + j] * past[j];
        }
        for (std::size_t i = 0; i < D; ++i) x[t * D + i] += acc[i];
    }
}

// In place: x holds innovations on entry (row-major, total x d) and the process on exit.
void run_recursion(const std::vector<double>& a, std::size_t d, std::size_t p, std::vector<double>& x) {
    if (d == 1) return run_fixed<1>(a, p, x);
    if (d == 2) return run_fixed<2>(a, p, x);
    if (d == 3) return run_fixed<3>(a, p, x);
    const std::size_t total = x.size() / d;
    for (std::size_t t = 0; t < total; ++t) {
        double* xt = &x[t * d];
        const std::size_t lags = std::min(p, t);
        for (std::size_t k = 1; k <= lags; ++k) {
            const double* past = &x[(t - k) * d];
            const double* ak = &a[(k - 1) * d * d];
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                const double* row = ak + i * d;
                for (std::size_t j = 0; j < d; ++j) acc += row[j] * past[j];
                xt[i] += acc;
            }
        }
    }
}

Eigen::MatrixXd tail_to_matrix(const std::vector<double>& x, std::size_t d, std::size_t skip) {
    const std::size_t n = x.size() / d - skip;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < d; ++i)
            out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = x[(t + skip) * d + i];
    return out;
}

std::vector<double> poly_from_roots(const std::vector<std::complex<double>>& roots) {
    // monic: c[0] z^p + c[1] z^{p-1} + ... + c[p]
    std::vector<std::complex<double>> c{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= r * c[i];
        }
        c = std::move(next);
    }
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
    return out;
}

} // namespace

InnovationSpec InnovationSpec::gaussian(std::size_t dim) {
    if (dim < 1) throw InvalidArgument("innovation dimension must be positive");
    return {Kind::gaussian_std, 0.0, 0.0, dim};
}

InnovationSpec InnovationSpec::uniform(double lower, double upper, std::size_t dim) {
    if (dim < 1) throw InvalidArgument("innovation dimension must be positive");
    if (!(lower < upper)) throw InvalidArgument("uniform innovations need lower < upper");
    if (std::abs(lower + upper) > 1e-12 * (upper - lower))
        throw InvalidArgument("uniform innovations must be zero-mean (lower = -upper)");
    return {Kind::uniform, lower, upper, dim};
}

InnovationSpec InnovationSpec::unit_uniform(std::size_t dim) {
    return uniform(-std::numbers::sqrt3, std::numbers::sqrt3, dim);
}

double InnovationSpec::variance() const noexcept {
    if (kind == Kind::gaussian_std) return 1.0;
    const double w = upper - lower;
    return w * w / 12.0;
}

std::vector<double> lowpass_autocovariance(std::size_t max_lag, double cutoff, const LowpassShape& shape) {
    if (!(cutoff > 0.0 && cutoff < 0.5)) throw InvalidArgument("cutoff must lie in (0, 0.5)");
    const double lo = cutoff - 0.5 * shape.transition;
    const double hi = cutoff + 0.5 * shape.transition;
    if (shape.transition < 0.0 || lo < 0.0 || hi > 0.5)
        throw InvalidArgument("roll-off band must fit inside (0, 0.5)");
    if (!(shape.floor >= 0.0 && shape.floor < 1.0)) throw InvalidArgument("stop-band floor must lie in [0, 1)");

    auto gain = [&](double f) {
        double h = 0.0;
        if (f <= lo) h = 1.0;
        else if (f < hi) h = 0.5 * (1.0 + std::cos(std::numbers::pi * (f - lo) / (hi - lo)));
        return shape.floor + (1.0 - shape.floor) * h;
    };

    // r(k) = 2 int_0^{1/2} P(f) cos(2 pi f k) df, midpoint rule
    constexpr std::size_t grid = 1u << 15;
    const double df = 0.5 / static_cast<double>(grid);
    std::vector<double> r(max_lag + 1, 0.0);
    for (std::size_t i = 0; i < grid; ++i) {
        const double f = (static_cast<double>(i) + 0.5) * df;
        const double w = 2.0 * gain(f) * df;
        for (std::size_t k = 0; k <= max_lag; ++k)
            r[k] += w * std::cos(2.0 * std::numbers::pi * f * static_cast<double>(k));
    }
    return r;
}

LevinsonResult levinson_durbin(const std::vector<double>& acov, std::size_t order) {
    if (acov.size() < order + 1) throw InvalidArgument("Levinson-Durbin needs r(0..p)");
    if (!(acov[0] > 0.0)) throw DesignFailure("autocovariance r(0) must be positive");
    LevinsonResult out{std::vector<double>(order, 0.0), std::vector<double>(order, 0.0), acov[0]};
    auto& a = out.coeffs;
    std::vector<double> prev(order, 0.0);
    for (std::size_t m = 1; m <= order; ++m) {
        double acc = acov[m];
        for (std::size_t j = 1; j < m; ++j) acc -= a[j - 1] * acov[m - j];
        const double k = acc / out.innovation_variance;
        if (!std::isfinite(k) || std::abs(k) >= 1.0)
            throw DesignFailure("Yule-Walker system is singular (reflection coefficient at the unit circle)");
        prev = a;
        a[m - 1] = k;
        for (std::size_t j = 1; j < m; ++j) a[j - 1] = prev[j - 1] - k * prev[m - j - 1];
        out.reflection[m - 1] = k;
        out.innovation_variance *= 1.0 - k * k;
        if (!(out.innovation_variance > 0.0)) throw DesignFailure("Yule-Walker prediction error vanished");
    }
    return out;
}

VarModel design_lowpass_ar(std::size_t order, double cutoff, const LowpassShape& shape) {
    if (order < 1) throw InvalidArgument("AR order must be at least 1");
    const auto acov = lowpass_autocovariance(order, cutoff, shape);
    VarModel model = VarModel::scalar(levinson_durbin(acov, order).coeffs);
    if (model.is_stable()) return model;

    // Reflect any root on or outside the unit circle back inside.
    Eigen::EigenSolver<Eigen::MatrixXd> eig(model.companion(), false);
    std::vector<std::complex<double>> roots;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        auto r = eig.eigenvalues()(i);
        const double mag = std::abs(r);
        if (mag >= 1.0) r = mag == 1.0 ? r * (1.0 - 1e-6) : 1.0 / std::conj(r);
        roots.push_back(r);
    }
    const auto poly = poly_from_roots(roots);
    std::vector<double> coeffs(order);
    for (std::size_t k = 1; k <= order; ++k) coeffs[k - 1] = -poly[k];
    return VarModel::scalar(coeffs);
}

double ar_power_spectrum(const VarModel& model, double frequency, double innovation_variance) {
    if (model.dim() != 1) throw InvalidArgument("ar_power_spectrum is defined for scalar models");
    std::complex<double> denom = 1.0;
    for (std::size_t k = 1; k <= model.order(); ++k)
        denom -= model.coeff(k)(0, 0) *
                 std::polar(1.0, -2.0 * std::numbers::pi * frequency * static_cast<double>(k));
    return innovation_variance / std::norm(denom);
}

VarModel random_stable_var(std::size_t dim, std::size_t order, double radius, std::uint64_t seed) {
    if (!(radius > 0.0 && radius < 1.0)) throw InvalidArgument("target spectral radius must lie in (0, 1)");
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto d = static_cast<Eigen::Index>(dim);
    std::vector<Eigen::MatrixXd> coeffs;
    for (std::size_t k = 0; k < order; ++k) {
        Eigen::MatrixXd a(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) a(i, j) = gauss(rng);
        coeffs.push_back(std::move(a));
    }
    // common factor s on every A_k, found by bisection on the companion radius
    auto radius_at = [&](double scale) {
        std::vector<Eigen::MatrixXd> scaled;
        for (const auto& a : coeffs) scaled.push_back(scale * a);
        return VarModel(dim, std::move(scaled)).spectral_radius();
    };
    double lo = 0.0, hi = 1.0;
    while (radius_at(hi) < radius) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw DesignFailure("random VAR has zero spectral radius");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (radius_at(mid) < radius ? lo : hi) = mid;
    }
    for (auto& a : coeffs) a *= lo;
    return VarModel(dim, std::move(coeffs));
}

MultiSeries simulate_var(const VarModel& model, std::size_t n, const InnovationSpec& spec, std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("series length must be positive");
    if (spec.dim != model.dim()) throw InvalidArgument("innovation and model dimensions differ");
    if (!model.is_stable()) throw InvalidArgument("refusing to simulate an unstable VAR model");
    const auto d = model.dim();
    const auto p = model.order();
    const std::size_t burn_in = 10 * p;
    Rng rng(seed);
    std::vector<double> x((burn_in + n) * d);
    draw_innovations(spec, rng, x.data(), x.size());
    run_recursion(flatten(model), d, p, x);
    return MultiSeries(tail_to_matrix(x, d, burn_in));
}

void simulate_gaussian_var(const VarModel& model, const Eigen::MatrixXd& factor, std::size_t n, std::size_t burn_in,
                           Rng& rng, Eigen::MatrixXd& out) {
    const auto d = model.dim();
    const auto p = model.order();
    if (static_cast<std::size_t>(factor.rows()) != d || static_cast<std::size_t>(factor.cols()) != d)
        throw InvalidArgument("innovation factor must be d x d");
    std::vector<double> x((burn_in + n) * d);
    std::vector<double> g(d);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t t = 0; t < burn_in + n; ++t) {
        for (auto& v : g) v = gauss(rng);
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j <= i; ++j)
                acc += factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * g[j];
            x[t * d + i] = acc;
        }
    }
    run_recursion(flatten(model), d, p, x);
    out = tail_to_matrix(x, d, burn_in);
}

MultiSeries embed(const MultiSeries& series, std::size_t target_dim) {
    if (series.dim() != 1) throw InvalidArgument("embedding expects a scalar series");
    if (target_dim < 1 || series.length() < target_dim) throw InvalidArgument("series shorter than the target dimension");
    const auto rows = static_cast<Eigen::Index>(series.length() / target_dim);
    const auto d = static_cast<Eigen::Index>(target_dim);
    Eigen::MatrixXd out(rows, d);
    const auto& x = series.values();
    for (Eigen::Index n = 0; n < rows; ++n)
        for (Eigen::Index j = 0; j < d; ++j) out(n, j) = x(d * n + j, 0);
    return MultiSeries(std::move(out));
}

Eigen::MatrixXd random_orthonormal_basis(std::size_t dim, std::size_t k, std::uint64_t seed) {
    if (k < 1 || k > dim) throw InvalidArgument("basis size must lie in [1, d]");
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto d = static_cast<Eigen::Index>(dim);
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd g(d, kk);
    for (Eigen::Index j = 0; j < kk; ++j)
        for (Eigen::Index i = 0; i < d; ++i) g(i, j) = gauss(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, kk);
    // sign convention R_jj > 0 makes Q Haar-distributed
    const Eigen::MatrixXd r = qr.matrixQR().topRows(kk).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < kk; ++j)
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    return q;
}

MultiSeries project(const MultiSeries& series, const Eigen::MatrixXd& basis) {
    if (static_cast<std::size_t>(basis.rows()) != series.dim()) throw InvalidArgument("basis rows must equal d");
    return MultiSeries(series.values() * basis);
}

MultiSeries random_projection(const MultiSeries& series, std::size_t k, std::uint64_t seed) {
    if (k < 1 || k >= series.dim()) throw InvalidArgument("projection dimension must satisfy 1 <= k < d");
    return project(series, random_orthonormal_basis(series.dim(), k, seed));
}

ChangeScenario ChangeScenario::standard() {
    ChangeScenario sc;
    sc.filter = design_lowpass_ar(5, 0.25);
    return sc;
}

void ChangeScenario::validate() const {
    if (!(change_begin > 0 && change_begin < change_end && change_end <= length))
        throw InvalidArgument("change scenario needs 0 < n_c < n_end <= N");
    if (filter.dim() != 1 || outside.dim != 1 || during.dim != 1)
        throw InvalidArgument("change scenario is scalar");
    if (!filter.is_stable()) throw InvalidArgument("change scenario filter must be stable");
}

MultiSeries generate_change_scenario(const ChangeScenario& scenario, std::uint64_t seed) {
    scenario.validate();
    const std::size_t burn_in = 10 * scenario.filter.order();
    Rng rng(seed);
    std::vector<double> x(burn_in + scenario.length);
    draw_innovations(scenario.outside, rng, x.data(), burn_in);
    for (std::size_t t = 0; t < scenario.length; ++t) {
        const bool changed = t >= scenario.change_begin && t < scenario.change_end;
        draw_innovations(changed ? scenario.during : scenario.outside, rng, &x[burn_in + t], 1);
    }
    run_recursion(flatten(scenario.filter), 1, scenario.filter.order(), x);
    return MultiSeries(tail_to_matrix(x, 1, burn_in));
}

} // namespace mkt
