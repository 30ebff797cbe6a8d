#pragma once

// File formats. Everything round-trips: floats are written with 17
// significant digits, datasets as `y,x1,...,xd`, intervals and sweep
// reports as flat CSV with fixed headers. Parse errors name the offending
// row.

#include <Eigen/Dense>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "enpi/core.hpp"
#include "enpi/eval.hpp"

namespace enpi {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline double parse_double(const std::string& s) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw std::invalid_argument("invalid value");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline void write_dataset_csv(const std::string& path, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw std::invalid_argument("invalid value");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "y";
    for (Eigen::Index j = 1; j <= X.cols(); ++j) f << ",x" << j;
    f << "\n";
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        f << fmt_double(y(r));
        for (Eigen::Index j = 0; j < X.cols(); ++j) f << "," << fmt_double(X(r, j));
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

// Reads `y,x1,...,xd`. Returned rows carry no split; callers apply
// train_fraction chronologically.
inline void read_dataset_csv(const std::string& path, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty csv: " + path);
    auto header = detail::split_csv_line(line);
    if (header.empty() || header[0] != "y")
        throw std::runtime_error("malformed csv header (want y,x1,...): " + path);
    const std::size_t ncol = header.size();
    if (ncol < 2) throw std::runtime_error("malformed csv header (no feature columns): " + path);

    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != ncol)
            throw std::runtime_error("malformed csv row " + std::to_string(lineno) + ": " + path);
        std::vector<double> vals(ncol);
        for (std::size_t c = 0; c < ncol; ++c) {
            try {
                vals[c] = detail::parse_double(cells[c]);
            } catch (const std::exception&) {
                throw std::runtime_error("malformed csv row " + std::to_string(lineno) + ": " + path);
            }
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw std::runtime_error("csv has no data rows: " + path);
    X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ncol - 1));
    y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        y(static_cast<Eigen::Index>(r)) = rows[r][0];
        for (std::size_t c = 1; c < ncol; ++c)
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = rows[r][c];
    }
}

struct IntervalRow {
    int trial = 1;
    int t = 0;
    double y_true = 0.0;
    double center = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool covered = false;
    double width = 0.0;
    double winkler = 0.0;
};

inline void write_intervals_csv(const std::string& path, const std::vector<IntervalRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "trial,t,y_true,center,lower,upper,covered,width,winkler\n";
    for (const auto& r : rows) {
        f << r.trial << "," << r.t << "," << fmt_double(r.y_true) << "," << fmt_double(r.center)
          << "," << fmt_double(r.lower) << "," << fmt_double(r.upper) << ","
          << (r.covered ? 1 : 0) << "," << fmt_double(r.width) << "," << fmt_double(r.winkler)
          << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

// Flexible reader for evaluation: requires t, y_true, lower, upper columns
// (any order); trial is optional and defaults to 1. Extra columns are
// ignored, so externally produced interval files fit through the same door.
inline std::vector<IntervalRow> read_intervals_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty csv: " + path);
    auto header = detail::split_csv_line(line);
    int c_trial = -1, c_t = -1, c_y = -1, c_lo = -1, c_hi = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "trial") c_trial = static_cast<int>(i);
        else if (header[i] == "t") c_t = static_cast<int>(i);
        else if (header[i] == "y_true") c_y = static_cast<int>(i);
        else if (header[i] == "lower") c_lo = static_cast<int>(i);
        else if (header[i] == "upper") c_hi = static_cast<int>(i);
    }
    if (c_t < 0 || c_y < 0 || c_lo < 0 || c_hi < 0)
        throw std::runtime_error("csv needs columns t,y_true,lower,upper: " + path);

    std::vector<IntervalRow> rows;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("malformed csv row " + std::to_string(lineno) + ": " + path);
        try {
            IntervalRow r;
            r.trial = (c_trial >= 0)
                          ? static_cast<int>(detail::parse_double(cells[static_cast<std::size_t>(c_trial)]))
                          : 1;
            r.t = static_cast<int>(detail::parse_double(cells[static_cast<std::size_t>(c_t)]));
            r.y_true = detail::parse_double(cells[static_cast<std::size_t>(c_y)]);
            r.lower = detail::parse_double(cells[static_cast<std::size_t>(c_lo)]);
            r.upper = detail::parse_double(cells[static_cast<std::size_t>(c_hi)]);
            rows.push_back(r);
        } catch (const std::exception&) {
            throw std::runtime_error("malformed csv row " + std::to_string(lineno) + ": " + path);
        }
    }
    if (rows.empty()) throw std::runtime_error("csv has no data rows: " + path);
    return rows;
}

inline void write_report_csv(const std::string& path, const std::vector<ExperimentReport>& reports) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "method,alpha,coverage_mean,coverage_sd,width_mean,width_sd,winkler_mean,winkler_sd,"
         "n_trials\n";
    for (const auto& r : reports) {
        f << r.method << "," << fmt_double(r.alpha) << "," << fmt_double(r.coverage_mean) << ","
          << fmt_double(r.coverage_sd) << "," << fmt_double(r.width_mean) << ","
          << fmt_double(r.width_sd) << "," << fmt_double(r.winkler_mean) << ","
          << fmt_double(r.winkler_sd) << "," << r.n_trials << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace enpi
