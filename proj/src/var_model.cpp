#include "mkt/var_model.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "mkt/errors.hpp"
#include "mkt/stats.hpp"

namespace mkt {

VarModel::VarModel(std::size_t dim, std::vector<Eigen::MatrixXd> coeffs) : dim_(dim), coeffs_(std::move(coeffs)) {
    if (dim_ < 1) throw InvalidArgument("VAR dimension must be positive");
    if (coeffs_.empty()) throw InvalidArgument("VAR order must be at least 1");
    const auto d = static_cast<Eigen::Index>(dim_);
    for (const auto& a : coeffs_) {
        if (a.rows() != d || a.cols() != d) throw InvalidArgument("coefficient matrices must be d x d");
        if (!a.allFinite()) throw InvalidData("coefficient matrices must be finite");
    }
}

VarModel VarModel::zeros(std::size_t dim, std::size_t order) {
    const auto d = static_cast<Eigen::Index>(dim);
    return VarModel(dim, std::vector<Eigen::MatrixXd>(order, Eigen::MatrixXd::Zero(d, d)));
}

VarModel VarModel::scalar(const std::vector<double>& coeffs) {
    std::vector<Eigen::MatrixXd> mats;
    mats.reserve(coeffs.size());
    for (double a : coeffs) mats.push_back(Eigen::MatrixXd::Constant(1, 1, a));
    return VarModel(1, std::move(mats));
}

Eigen::MatrixXd VarModel::stacked() const {
    const auto d = static_cast<Eigen::Index>(dim_);
    Eigen::MatrixXd out(d, d * static_cast<Eigen::Index>(order()));
    for (std::size_t k = 0; k < order(); ++k) out.middleCols(static_cast<Eigen::Index>(k) * d, d) = coeffs_[k];
    return out;
}

Eigen::MatrixXd VarModel::companion() const {
    const auto d = static_cast<Eigen::Index>(dim_);
    const auto dp = d * static_cast<Eigen::Index>(order());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dp, dp);
    c.topRows(d) = stacked();
    if (dp > d) c.bottomLeftCorner(dp - d, dp - d).setIdentity();
    return c;
}

double VarModel::spectral_radius() const {
    const Eigen::MatrixXd c = companion();
    if (c.rows() == 1) return std::abs(c(0, 0));
    Eigen::EigenSolver<Eigen::MatrixXd> eig(c, false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

VarModel fit_ols(const MultiSeries& series, std::size_t order) {
    const auto n = series.length();
    const auto d = series.dim();
    if (order < 1) throw InvalidArgument("VAR order must be at least 1");
    if (n <= d * order + 1) throw InvalidArgument("fit_ols needs N > d p + 1");

    const auto rows = static_cast<Eigen::Index>(n - order);
    const auto di = static_cast<Eigen::Index>(d);
    const Eigen::MatrixXd& x = series.values();
    Eigen::MatrixXd z(rows, di * static_cast<Eigen::Index>(order));
    for (std::size_t k = 0; k < order; ++k) {
        // column block k holds x(i - k - 1) for i = p..N-1
        z.middleCols(static_cast<Eigen::Index>(k) * di, di) =
            x.middleRows(static_cast<Eigen::Index>(order - k - 1), rows);
    }
    const Eigen::MatrixXd y = x.bottomRows(rows);

    const Eigen::MatrixXd gram = z.transpose() * z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12) throw RankDeficiency("Gram matrix Z^T Z is singular");

    const Eigen::MatrixXd w = z.colPivHouseholderQr().solve(y); // dp x d
    std::vector<Eigen::MatrixXd> coeffs;
    coeffs.reserve(order);
    for (std::size_t k = 0; k < order; ++k)
        coeffs.push_back(w.middleRows(static_cast<Eigen::Index>(k) * di, di).transpose());
    return VarModel(d, std::move(coeffs));
}

YuleWalkerFit fit_yule_walker(const LagCovariance& cov, std::size_t order) {
    if (order < 1) throw InvalidArgument("VAR order must be at least 1");
    if (order > cov.max_lag()) throw InvalidArgument("Yule-Walker order exceeds the available lags");
    const auto d = static_cast<Eigen::Index>(cov.dim());
    const auto q = static_cast<Eigen::Index>(order);

    // block (j, k) = E{x(n-1-j) x(n-1-k)^T} = S(k - j), S(-m) = S(m)^T
    Eigen::MatrixXd toeplitz(d * q, d * q);
    Eigen::MatrixXd rhs(d, d * q);
    for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index k = 0; k < q; ++k) {
            if (k >= j)
                toeplitz.block(j * d, k * d, d, d) = cov.at(static_cast<std::size_t>(k - j));
            else
                toeplitz.block(j * d, k * d, d, d) = cov.at(static_cast<std::size_t>(j - k)).transpose();
        }
        rhs.middleCols(j * d, d) = cov.at(static_cast<std::size_t>(j + 1));
    }
    toeplitz = 0.5 * (toeplitz + toeplitz.transpose()).eval();
    const Eigen::LLT<Eigen::MatrixXd> llt(toeplitz);
    if (llt.info() != Eigen::Success) throw RankDeficiency("block Toeplitz covariance is not positive definite");
    const Eigen::MatrixXd stacked = llt.solve(rhs.transpose()).transpose(); // d x dq

    std::vector<Eigen::MatrixXd> coeffs;
    Eigen::MatrixXd innov = cov.zero_lag();
    for (Eigen::Index k = 0; k < q; ++k) {
        coeffs.push_back(stacked.middleCols(k * d, d));
        innov -= coeffs.back() * cov.at(static_cast<std::size_t>(k + 1)).transpose();
    }
    innov = 0.5 * (innov + innov.transpose()).eval();
    return {VarModel(cov.dim(), std::move(coeffs)), std::move(innov)};
}

MultiSeries residuals(const VarModel& model, const MultiSeries& series) {
    const auto p = model.order();
    const auto n = series.length();
    if (series.dim() != model.dim()) throw InvalidArgument("model and series dimensions differ");
    if (n <= p) throw InvalidArgument("residuals need N > p");
    const auto rows = static_cast<Eigen::Index>(n - p);
    const Eigen::MatrixXd& x = series.values();
    Eigen::MatrixXd e = x.bottomRows(rows);
    for (std::size_t k = 1; k <= p; ++k)
        e -= x.middleRows(static_cast<Eigen::Index>(p - k), rows) * model.coeff(k).transpose();
    return MultiSeries(std::move(e));
}

RlsState::RlsState(std::size_t dim, std::size_t order, double lambda1, double delta)
    : dim_(dim), order_(order), lambda1_(lambda1), delta_(delta) {
    if (dim_ < 1 || order_ < 1) throw InvalidArgument("RLS needs d >= 1 and p >= 1");
    if (!(lambda1_ > 0.0 && lambda1_ <= 1.0)) throw InvalidArgument("lambda1 must lie in (0, 1]");
    if (!(delta_ > 0.0)) throw InvalidArgument("delta must be positive");
    const auto dp = static_cast<Eigen::Index>(dim_ * order_);
    gram_inv_ = Eigen::MatrixXd::Identity(dp, dp) / delta_;
    weights_ = Eigen::MatrixXd::Zero(dp, static_cast<Eigen::Index>(dim_));
}

VarModel RlsState::model() const {
    const auto d = static_cast<Eigen::Index>(dim_);
    std::vector<Eigen::MatrixXd> coeffs;
    for (std::size_t k = 0; k < order_; ++k)
        coeffs.push_back(weights_.middleRows(static_cast<Eigen::Index>(k) * d, d).transpose());
    return VarModel(dim_, std::move(coeffs));
}

Eigen::VectorXd RlsState::regressor() const {
    if (!warmed_up()) throw InvalidArgument("regressor needs p past observations");
    const auto d = static_cast<Eigen::Index>(dim_);
    Eigen::VectorXd z(d * static_cast<Eigen::Index>(order_));
    for (std::size_t k = 0; k < order_; ++k) z.segment(static_cast<Eigen::Index>(k) * d, d) = history_[k];
    return z;
}

void RlsState::remember(const Eigen::VectorXd& x) {
    history_.push_front(x);
    if (history_.size() > order_) history_.pop_back();
}

std::optional<Eigen::VectorXd> RlsState::push(const Eigen::VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != dim_) throw InvalidArgument("observation has the wrong dimension");
    if (!x.allFinite()) throw InvalidData("observation is not finite");
    if (!warmed_up()) {
        remember(x);
        return std::nullopt;
    }
    return update(x);
}

Eigen::VectorXd RlsState::update(const Eigen::VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != dim_) throw InvalidArgument("observation has the wrong dimension");
    const Eigen::VectorXd z = regressor();
    const Eigen::VectorXd err = x - weights_.transpose() * z;

    const Eigen::VectorXd u = gram_inv_ * z / lambda1_;
    const double b = 1.0 / (1.0 + z.dot(u));
    Eigen::MatrixXd next_inv = gram_inv_ / lambda1_ - b * u * u.transpose();
    next_inv = 0.5 * (next_inv + next_inv.transpose()).eval();
    Eigen::MatrixXd next_w = weights_ + (b * u) * err.transpose();
    if (!std::isfinite(b) || !next_inv.allFinite() || !next_w.allFinite() || !err.allFinite())
        throw NumericOverflow("RLS update is not finite");

    gram_inv_ = std::move(next_inv);
    weights_ = std::move(next_w);
    ++updates_;
    remember(x);
    return err;
}

RlsState rls_init(std::size_t dim, std::size_t order, double lambda1, double delta) {
    return RlsState(dim, order, lambda1, delta);
}

Eigen::VectorXd rls_update(RlsState& state, const Eigen::VectorXd& x) { return state.update(x); }

std::string to_json(const VarModelRecord& record) {
    nlohmann::json j;
    const auto d = record.model.dim();
    j["d"] = d;
    j["p"] = record.model.order();
    nlohmann::json mats = nlohmann::json::array();
    for (const auto& a : record.model.coeffs()) {
        std::vector<double> flat;
        flat.reserve(d * d);
        for (Eigen::Index r = 0; r < a.rows(); ++r)
            for (Eigen::Index c = 0; c < a.cols(); ++c) flat.push_back(a(r, c));
        mats.push_back(flat);
    }
    j["A"] = mats;
    j["lambda1"] = record.lambda1;
    j["delta"] = record.delta;
    return j.dump();
}

VarModelRecord var_model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), 1);
    }
    try {
        const auto d = j.at("d").get<std::size_t>();
        const auto p = j.at("p").get<std::size_t>();
        const auto& mats = j.at("A");
        if (!mats.is_array() || mats.size() != p) throw SchemaError("A must hold p matrices");
        std::vector<Eigen::MatrixXd> coeffs;
        for (const auto& m : mats) {
            const auto flat = m.get<std::vector<double>>();
            if (flat.size() != d * d) throw SchemaError("each A_k must hold d*d entries");
            Eigen::MatrixXd a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < d; ++c)
                    a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * d + c];
            coeffs.push_back(std::move(a));
        }
        return {VarModel(d, std::move(coeffs)), j.value("lambda1", 1.0), j.value("delta", 1.0)};
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("model JSON: ") + e.what());
    }
}

} // namespace mkt
