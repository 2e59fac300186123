#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kowcpi/errors.hpp"
#include "kowcpi/pipeline.hpp"

namespace kowcpi {

namespace detail {

// Round-trippable, locale-independent float formatting; output files must be
// byte-identical across replays.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t start = 0;
        while (start < cell.size() && cell[start] == ' ') ++start;
        cells.push_back(cell.substr(start));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline double parse_cell(const std::string& cell, const std::string& column, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
        throw DataError("non-numeric value '" + cell + "' in column " + column + " at row " +
                        std::to_string(row));
    }
    return v;
}

} // namespace detail

// Reads a series from a CSV with a header row containing column `y` and an
// optional strictly increasing `t` column.
inline std::vector<double> ingest_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.good()) throw DataError("cannot open input file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file " + path.string());
    const auto header = detail::split_csv_line(line);
    std::optional<std::size_t> y_col, t_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "y") y_col = i;
        if (header[i] == "t") t_col = i;
    }
    if (!y_col) throw DataError("missing required column 'y' in " + path.string());

    std::vector<double> series;
    double prev_t = 0.0;
    bool have_prev = false;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("row " + std::to_string(row) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
        }
        series.push_back(detail::parse_cell(cells[*y_col], "y", row));
        if (t_col) {
            const double t = detail::parse_cell(cells[*t_col], "t", row);
            if (have_prev && !(t > prev_t)) {
                throw DataError("non-monotone t at row " + std::to_string(row));
            }
            prev_t = t;
            have_prev = true;
        }
    }
    if (series.empty()) throw DataError("no data rows in " + path.string());
    return series;
}

// External predictions: header `t,yhat`, one row per prediction step.
inline std::vector<std::pair<long long, double>>
read_predictions_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.good()) throw DataError("cannot open predictions file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty predictions file " + path.string());
    const auto header = detail::split_csv_line(line);
    std::optional<std::size_t> t_col, yhat_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "t") t_col = i;
        if (header[i] == "yhat") yhat_col = i;
    }
    if (!t_col || !yhat_col) {
        throw DataError("predictions file needs columns 't' and 'yhat': " + path.string());
    }
    std::vector<std::pair<long long, double>> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("row " + std::to_string(row) + " malformed in " + path.string());
        }
        const double t = detail::parse_cell(cells[*t_col], "t", row);
        const double yhat = detail::parse_cell(cells[*yhat_col], "yhat", row);
        out.emplace_back(static_cast<long long>(t), yhat);
    }
    return out;
}

inline void write_series_csv(const std::filesystem::path& path, std::span<const double> series) {
    std::ofstream out(path);
    if (!out.good()) throw DataError("cannot write " + path.string());
    out << "t,y\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << i << ',' << detail::fmt_double(series[i]) << '\n';
    }
}

inline void write_intervals_csv(const std::filesystem::path& path,
                                std::span<const IntervalResult> steps) {
    std::ofstream out(path);
    if (!out.good()) throw DataError("cannot write " + path.string());
    out << "t,lower,upper,beta_star,gap,covered\n";
    for (const auto& r : steps) {
        out << r.t << ',' << detail::fmt_double(r.lower) << ',' << detail::fmt_double(r.upper)
            << ',' << detail::fmt_double(r.beta_star) << ',' << detail::fmt_double(r.gap) << ',';
        if (r.covered.has_value()) out << (*r.covered ? 1 : 0);
        out << '\n';
    }
}

} // namespace kowcpi
