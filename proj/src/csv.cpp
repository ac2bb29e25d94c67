#include "mkt/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "mkt/errors.hpp"

namespace mkt {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool parse_double(std::string_view field, double& value) {
    if (field.empty()) return false;
    if (field.front() == '+') field.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    return ec == std::errc() && ptr == field.data() + field.size();
}

bool looks_like_header(const std::vector<std::string_view>& fields) {
    double v;
    for (auto f : fields)
        if (parse_double(f, v)) return false;
    return true;
}

} // namespace

void write_csv(std::ostream& out, const MultiSeries& series) {
    const auto d = series.dim();
    for (std::size_t j = 0; j < d; ++j) out << (j ? ",x" : "x") << j + 1;
    out << '\n';
    std::ostringstream buf;
    buf.precision(17);
    const auto& x = series.values();
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) buf << (j ? "," : "") << x(n, j);
        buf << '\n';
    }
    out << buf.str();
}

MultiSeries read_csv(std::istream& in, std::optional<std::size_t> expected_dim) {
    std::vector<double> values;
    std::size_t dim = 0;
    std::size_t line_no = 0;
    bool seen_content = false;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty()) continue;
        const auto fields = split(view);
        if (!seen_content) {
            seen_content = true;
            dim = fields.size();
            if (expected_dim && *expected_dim != dim)
                throw SchemaError("expected " + std::to_string(*expected_dim) + " columns, found " +
                                  std::to_string(dim));
            if (looks_like_header(fields)) continue;
        }
        if (fields.size() != dim)
            throw ParseError("expected " + std::to_string(dim) + " fields, found " + std::to_string(fields.size()),
                             line_no);
        for (auto f : fields) {
            double v;
            if (!parse_double(f, v)) throw ParseError("not a number: '" + std::string(f) + "'", line_no);
            if (!std::isfinite(v)) throw ParseError("non-finite value", line_no);
            values.push_back(v);
        }
    }
    if (values.empty()) throw ParseError("no data rows", line_no);
    const auto rows = static_cast<Eigen::Index>(values.size() / dim);
    Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(dim));
    for (Eigen::Index n = 0; n < rows; ++n)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(n, j) = values[static_cast<std::size_t>(n) * dim + j];
    return MultiSeries(std::move(m));
}

MultiSeries read_csv_file(const std::string& path, std::optional<std::size_t> expected_dim) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    return read_csv(in, expected_dim);
}

void write_csv_file(const std::string& path, const MultiSeries& series) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path);
    write_csv(out, series);
}

} // namespace mkt
