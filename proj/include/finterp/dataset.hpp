#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "finterp/errors.hpp"
#include "finterp/rng.hpp"

namespace finterp {

/// Finite set of anchors {X_i}: n points in R^d stored row-major.
///
/// Invariants (checked on construction): n >= 1, d >= 1, finite coordinates, no two points within
/// 1e-12 of each other.
class TrainingSet {
public:
    static constexpr double duplicate_tolerance = 1e-12;

    TrainingSet(std::vector<double> coords, std::size_t dim, std::string id = {},
                std::optional<std::vector<int>> labels = std::nullopt)
        : coords_(std::move(coords)), dim_(dim), id_(std::move(id)), labels_(std::move(labels)) {
        if (dim_ == 0) throw ValidationError("training set: dimension must be >= 1");
        if (coords_.empty()) throw ValidationError("training set: at least one point is required");
        if (coords_.size() % dim_ != 0)
            throw ValidationError("training set: coordinate count is not a multiple of the dimension");
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i)
            for (double x : point(i))
                if (!std::isfinite(x)) throw ValidationError("training set: point " + std::to_string(i) + " is not finite");
        if (labels_ && labels_->size() != n) throw ValidationError("training set: label count differs from point count");
        if (auto dup = find_duplicate())
            throw ValidationError("training set: points " + std::to_string(dup->first) + " and " +
                                  std::to_string(dup->second) + " coincide");
    }

    /// Convenience constructor from a list of points.
    static TrainingSet from_points(const std::vector<std::vector<double>>& points, std::string id = {}) {
        if (points.empty()) throw ValidationError("training set: at least one point is required");
        const std::size_t d = points.front().size();
        std::vector<double> flat;
        flat.reserve(points.size() * d);
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].size() != d)
                throw ValidationError("training set: point " + std::to_string(i) + " has dimension " +
                                      std::to_string(points[i].size()) + ", expected " + std::to_string(d));
            flat.insert(flat.end(), points[i].begin(), points[i].end());
        }
        return TrainingSet(std::move(flat), d, std::move(id));
    }

    std::size_t size() const noexcept { return coords_.size() / dim_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::string& id() const noexcept { return id_; }
    const std::optional<std::vector<int>>& labels() const noexcept { return labels_; }

    std::span<const double> point(std::size_t i) const noexcept { return {coords_.data() + i * dim_, dim_}; }
    std::span<const double> coords() const noexcept { return coords_; }

    /// max_i ||X_i||
    double max_norm() const noexcept {
        double best = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            double s = 0.0;
            for (double x : point(i)) s += x * x;
            best = std::max(best, std::sqrt(s));
        }
        return best;
    }

private:
    std::optional<std::pair<std::size_t, std::size_t>> find_duplicate() const {
        const double tol2 = duplicate_tolerance * duplicate_tolerance;
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double s = 0.0;
                auto a = point(i), b = point(j);
                for (std::size_t k = 0; k < dim_; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
                if (s <= tol2) return std::pair{i, j};
            }
        }
        return std::nullopt;
    }

    std::vector<double> coords_;
    std::size_t dim_;
    std::string id_;
    std::optional<std::vector<int>> labels_;
};

/// The second anchor set {Y_j} of two-sided interpolation has the same shape and invariants.
using SecondSet = TrainingSet;

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_real(std::string_view cell, std::size_t row, std::size_t col) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (cell.empty() || ec != std::errc() || ptr != end)
        throw ParseError(row, "column " + std::to_string(col + 1) + ": '" + std::string(cell) + "' is not a number");
    return value;
}

/// Splits one CSV line into real cells.
inline std::vector<double> parse_row(std::string_view line, std::size_t row) {
    std::vector<double> out;
    std::size_t col = 0;
    for (;;) {
        const auto comma = line.find(',');
        out.push_back(parse_real(line.substr(0, comma), row, col++));
        if (comma == std::string_view::npos) break;
        line.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace detail

/// Shortest decimal that reads back to the same double.
inline std::string format_real(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    (void)ec;
    return std::string(buf, ptr);
}

/// Reads a headerless (or `skip_header`) CSV of reals, one point per row.
inline TrainingSet load_csv(const std::filesystem::path& path, bool skip_header = false) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<double> coords;
    std::vector<std::size_t> rows;  // file row of each point
    std::size_t dim = 0, row = 0, points = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++row;
        if (skip_header && row == 1) continue;
        const auto trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        auto values = detail::parse_row(trimmed, row);
        if (dim == 0)
            dim = values.size();
        else if (values.size() != dim)
            throw ParseError(row, "expected " + std::to_string(dim) + " columns, found " + std::to_string(values.size()));
        coords.insert(coords.end(), values.begin(), values.end());
        rows.push_back(row);
        ++points;
    }
    if (points == 0) throw ValidationError("'" + path.string() + "': no data rows (n >= 1 required)");

    // Report duplicates by file row.
    const double tol2 = TrainingSet::duplicate_tolerance * TrainingSet::duplicate_tolerance;
    for (std::size_t i = 0; i < points; ++i) {
        for (std::size_t j = i + 1; j < points; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double diff = coords[i * dim + k] - coords[j * dim + k];
                s += diff * diff;
            }
            if (s <= tol2)
                throw ParseError(rows[j], "duplicate point (same as row " + std::to_string(rows[i]) + ")");
        }
    }
    return TrainingSet(std::move(coords), dim, path.stem().string());
}

inline void save_csv(const TrainingSet& ts, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        auto p = ts.point(i);
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (k) out << ',';
            out << format_real(p[k]);
        }
        out << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// n i.i.d. points uniform on [0,1]^d; a pure function of (n, d, seed).
inline TrainingSet uniform_toy(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (n == 0 || d == 0) throw ValidationError("uniform_toy: n and d must be >= 1");
    RandomStream rng(substream_key(seed, 0x746f79));  // "toy"
    std::vector<double> coords(n * d);
    for (double& x : coords) x = rng.uniform();
    return TrainingSet(std::move(coords), d, "uniform_toy(n=" + std::to_string(n) + ",d=" + std::to_string(d) +
                                                 ",seed=" + std::to_string(seed) + ")");
}

}  // namespace finterp
