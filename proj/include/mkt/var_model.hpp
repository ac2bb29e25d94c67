#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mkt/series.hpp"

namespace mkt {

class LagCovariance;

/// x(i) = sum_{k=1..p} A_k x(i-k) + eps(i).
class VarModel {
public:
    VarModel(std::size_t dim, std::vector<Eigen::MatrixXd> coeffs);

    /// Order-p model with every A_k = 0.
    static VarModel zeros(std::size_t dim, std::size_t order);
    /// Scalar AR(p) from a_1..a_p.
    static VarModel scalar(const std::vector<double>& coeffs);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t order() const noexcept { return coeffs_.size(); }
    const Eigen::MatrixXd& coeff(std::size_t k) const { return coeffs_.at(k - 1); }
    const std::vector<Eigen::MatrixXd>& coeffs() const noexcept { return coeffs_; }

    /// [A_1 A_2 ... A_p], d x dp.
    Eigen::MatrixXd stacked() const;
    /// dp x dp companion matrix.
    Eigen::MatrixXd companion() const;
    double spectral_radius() const;
    bool is_stable() const { return spectral_radius() < 1.0; }

private:
    std::size_t dim_;
    std::vector<Eigen::MatrixXd> coeffs_;
};

/// Ordinary least squares on Y = Z w. Requires N > dp + 1 and a nonsingular
/// Gram matrix (RankDeficiency otherwise). No intercept: center first.
VarModel fit_ols(const MultiSeries& series, std::size_t order);

/// Block Yule-Walker fit to S(0)..S(order). Returns the model and the
/// innovation covariance S(0) - sum_k A_k S(k)^T.
struct YuleWalkerFit {
    VarModel model;
    Eigen::MatrixXd innovation_cov;
};
YuleWalkerFit fit_yule_walker(const LagCovariance& cov, std::size_t order);

/// eps(i) = x(i) - sum_k A_k x(i-k) for i = p..N-1 (length N - p).
MultiSeries residuals(const VarModel& model, const MultiSeries& series);

/// Exponentially weighted recursive least squares for a VAR(p) predictor.
///
/// The first p observations only fill the regressor history. After that each
/// observation yields the a-priori residual x(t) - w^T z(t) and the standard
/// rank-one update of the inverse Gram matrix and weights.
class RlsState {
public:
    RlsState(std::size_t dim, std::size_t order, double lambda1, double delta);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t order() const noexcept { return order_; }
    double lambda1() const noexcept { return lambda1_; }
    double delta() const noexcept { return delta_; }

    bool warmed_up() const noexcept { return history_.size() == order_; }
    std::size_t updates() const noexcept { return updates_; }

    const Eigen::MatrixXd& gram_inv() const noexcept { return gram_inv_; }
    /// dp x d; column j predicts coordinate j.
    const Eigen::MatrixXd& weights() const noexcept { return weights_; }
    VarModel model() const;

    /// z(t) = [x(t-1); ...; x(t-p)]. Requires warmed_up().
    Eigen::VectorXd regressor() const;

    /// Feeds one observation; returns the a-priori residual once warmed up.
    std::optional<Eigen::VectorXd> push(const Eigen::VectorXd& x);

    /// Weight update for a warmed-up state. Throws NumericOverflow when the
    /// update is not finite; the state is left unchanged in that case.
    Eigen::VectorXd update(const Eigen::VectorXd& x);

private:
    void remember(const Eigen::VectorXd& x);

    std::size_t dim_;
    std::size_t order_;
    double lambda1_;
    double delta_;
    Eigen::MatrixXd gram_inv_;
    Eigen::MatrixXd weights_;
    std::deque<Eigen::VectorXd> history_; // most recent first
    std::size_t updates_ = 0;
};

RlsState rls_init(std::size_t dim, std::size_t order, double lambda1, double delta);

/// One recursive step on a warmed-up state; returns the a-priori residual.
Eigen::VectorXd rls_update(RlsState& state, const Eigen::VectorXd& x);

/// JSON record {d, p, A, lambda1, delta}; A holds p row-major d*d arrays.
struct VarModelRecord {
    VarModel model;
    double lambda1 = 1.0;
    double delta = 1.0;
};

std::string to_json(const VarModelRecord& record);
VarModelRecord var_model_from_json(const std::string& text);

} // namespace mkt
