#include "mkt/series.hpp"

#include "mkt/errors.hpp"

namespace mkt {

MultiSeries::MultiSeries(Eigen::MatrixXd values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1)
        throw InvalidArgument("series must have at least one sample and one dimension");
    if (!values_.allFinite())
        throw InvalidData("series contains non-finite values");
}

MultiSeries MultiSeries::from_scalar(std::span<const double> values) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
    return MultiSeries(std::move(m));
}

MultiSeries MultiSeries::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw InvalidArgument("series must have at least one sample");
    const auto d = rows.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t n = 0; n < rows.size(); ++n) {
        if (rows[n].size() != d) throw InvalidArgument("ragged rows: every vector needs d entries");
        for (std::size_t j = 0; j < d; ++j)
            m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = rows[n][j];
    }
    return MultiSeries(std::move(m));
}

MultiSeries MultiSeries::centered() const {
    Eigen::MatrixXd c = values_.rowwise() - values_.colwise().mean();
    return MultiSeries(std::move(c));
}

MultiSeries MultiSeries::column(std::size_t j) const {
    if (j >= dim()) throw InvalidArgument("column index out of range");
    return MultiSeries(values_.col(static_cast<Eigen::Index>(j)));
}

MultiSeries MultiSeries::slice(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > length()) throw InvalidArgument("invalid slice bounds");
    return MultiSeries(values_.middleRows(static_cast<Eigen::Index>(begin),
                                          static_cast<Eigen::Index>(end - begin)));
}

} // namespace mkt
