#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mkt/rng.hpp"
#include "mkt/series.hpp"
#include "mkt/var_model.hpp"

namespace mkt {

/// Distribution of the i.i.d. innovations driving a VAR model.
struct InnovationSpec {
    enum class Kind { gaussian_std, uniform };

    Kind kind = Kind::gaussian_std;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t dim = 1;

    static InnovationSpec gaussian(std::size_t dim = 1);
    /// U(lower, upper) per coordinate; requires lower < upper and lower = -upper.
    static InnovationSpec uniform(double lower, double upper, std::size_t dim = 1);
    /// U(-sqrt 3, sqrt 3): zero mean, unit variance.
    static InnovationSpec unit_uniform(std::size_t dim = 1);

    double variance() const noexcept;
};

/// Reference spectrum for the low-pass AR design: unit gain up to
/// cutoff - transition/2, raised-cosine roll-off to cutoff + transition/2,
/// then a flat stop band at `floor` (relative power).
struct LowpassShape {
    double transition = 0.05;
    double floor = 0.01;
};

/// Autocovariance r(0..max_lag) of the reference low-pass spectrum.
std::vector<double> lowpass_autocovariance(std::size_t max_lag, double cutoff, const LowpassShape& shape = {});

/// Levinson-Durbin solution of the order-p Yule-Walker system.
struct LevinsonResult {
    std::vector<double> coeffs;      // a_1..a_p
    std::vector<double> reflection;  // k_1..k_p
    double innovation_variance;
};
LevinsonResult levinson_durbin(const std::vector<double>& acov, std::size_t order);

/// Stable AR(p) (d = 1) whose spectrum follows the reference low-pass shape.
/// Roots that land on or outside the unit circle are reflected inside.
VarModel design_lowpass_ar(std::size_t order, double cutoff, const LowpassShape& shape = {});

/// sigma2 / |1 - sum a_k e^{-i 2 pi f k}|^2 for a scalar model.
double ar_power_spectrum(const VarModel& model, double frequency, double innovation_variance = 1.0);

/// Random d-dimensional VAR(p) with i.i.d. Gaussian coefficients, all A_k
/// multiplied by one common factor so that the companion spectral radius
/// equals `radius` (to about 1e-12).
VarModel random_stable_var(std::size_t dim, std::size_t order, double radius, std::uint64_t seed);

/// Runs the VAR recursion from a zero state, discarding 10 p burn-in samples.
/// Refuses unstable models (InvalidArgument).
MultiSeries simulate_var(const VarModel& model, std::size_t n, const InnovationSpec& spec, std::uint64_t seed);

/// Gaussian VAR with innovations factor * N(0, I), written into `out`
/// (n x d, resized as needed). Used by the bootstrap inner loop.
void simulate_gaussian_var(const VarModel& model, const Eigen::MatrixXd& factor, std::size_t n,
                           std::size_t burn_in, Rng& rng, Eigen::MatrixXd& out);

/// Blocks a scalar series into vectors (x(dn), ..., x(dn + d - 1)).
MultiSeries embed(const MultiSeries& series, std::size_t target_dim);

/// d x k matrix with orthonormal columns, Haar-distributed.
Eigen::MatrixXd random_orthonormal_basis(std::size_t dim, std::size_t k, std::uint64_t seed);

/// y(n) = P^T x(n).
MultiSeries project(const MultiSeries& series, const Eigen::MatrixXd& basis);

/// Projection onto a random k-dimensional subspace through the origin.
MultiSeries random_projection(const MultiSeries& series, std::size_t k, std::uint64_t seed);

/// Scalar AR series whose innovations switch distribution on [change_begin, change_end).
struct ChangeScenario {
    std::size_t length = 15000;
    std::size_t change_begin = 5000;
    std::size_t change_end = 10000;
    InnovationSpec outside = InnovationSpec::gaussian();
    InnovationSpec during = InnovationSpec::unit_uniform();
    VarModel filter = VarModel::zeros(1, 1);

    /// N = 15000, change on [5000, 10000), N(0,1) -> U(-sqrt3, sqrt3),
    /// low-pass AR(5) at cutoff 0.25.
    static ChangeScenario standard();
    void validate() const;
};

MultiSeries generate_change_scenario(const ChangeScenario& scenario, std::uint64_t seed);

} // namespace mkt
