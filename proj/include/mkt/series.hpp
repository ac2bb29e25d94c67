#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mkt {

/// A length-N sequence of d-dimensional observations, stored one row per
/// time step. Every entry is finite and N, d >= 1; construction enforces both.
class MultiSeries {
public:
    explicit MultiSeries(Eigen::MatrixXd values);

    static MultiSeries from_scalar(std::span<const double> values);
    static MultiSeries from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    std::size_t length() const noexcept { return static_cast<std::size_t>(values_.rows()); }

    const Eigen::MatrixXd& values() const noexcept { return values_; }
    Eigen::VectorXd at(std::size_t n) const { return values_.row(static_cast<Eigen::Index>(n)).transpose(); }

    Eigen::VectorXd mean() const { return values_.colwise().mean().transpose(); }

    /// Copy with the sample mean removed from every column.
    MultiSeries centered() const;

    /// Single column as a scalar series.
    MultiSeries column(std::size_t j) const;

    /// Rows [begin, end).
    MultiSeries slice(std::size_t begin, std::size_t end) const;

private:
    Eigen::MatrixXd values_;
};

} // namespace mkt
