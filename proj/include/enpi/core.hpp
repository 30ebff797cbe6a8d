#pragma once

// Shared domain types and the quantile/p-value primitives every method in
// this library is built on.
//
// Quantile convention (used everywhere, pinned once here): the level-q
// empirical quantile of n values is the k-th smallest with
//     k = min(n, ceil(q * (n + 1))),  1-indexed.
// Under this convention the interval-membership / p-value duality is exact:
// for distinct residuals and alpha*n integer,
//     eps_new <= quantile(1 - alpha)  <=>  p_value >= alpha.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <vector>

namespace enpi {

inline void require_finite(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("invalid value");
}

inline void require_finite(const std::vector<double>& vs) {
    for (double v : vs) require_finite(v);
}

// Level in (0, 1]. Throws "empty sample" / "invalid value".
inline double empirical_quantile(std::vector<double> values, double level) {
    if (values.empty()) throw std::invalid_argument("empty sample");
    if (!(level > 0.0) || level > 1.0 || !std::isfinite(level))
        throw std::invalid_argument("invalid value");
    require_finite(values);
    auto n = values.size();
    auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n + 1)));
    k = std::min(n, std::max<std::size_t>(k, 1));
    std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
    return values[k - 1];
}

// Smallest value whose cumulative normalized weight reaches `level`.
// Values are sorted ascending (stable, so equal values keep input order
// and their weights accumulate deterministically). +inf values are allowed;
// weights must be finite, non-negative, and not all zero.
inline double weighted_quantile(const std::vector<double>& values,
                                const std::vector<double>& weights,
                                double level) {
    if (values.empty()) throw std::invalid_argument("empty sample");
    if (values.size() != weights.size()) throw std::invalid_argument("invalid value");
    if (!(level > 0.0) || level > 1.0 || !std::isfinite(level))
        throw std::invalid_argument("invalid value");
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isnan(values[i])) throw std::invalid_argument("invalid value");
        if (!std::isfinite(weights[i]) || weights[i] < 0.0)
            throw std::invalid_argument("invalid value");
        total += weights[i];
    }
    if (!(total > 0.0)) throw std::invalid_argument("invalid value");

    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    // Compare unnormalized cumulative weight against level*total: with equal
    // weights both sides reduce to the same product, so the order-statistic
    // reduction is exact rather than subject to accumulated rounding.
    double cum = 0.0;
    const double threshold = level * total;
    for (std::size_t i : order) {
        cum += weights[i];
        if (cum >= threshold) return values[i];
    }
    return values[order.back()];  // level == 1 with rounding slack
}

// (1/n) * #{ residuals[i] > eps_new }.
inline double empirical_p_value(const std::vector<double>& residuals, double eps_new) {
    if (residuals.empty()) throw std::invalid_argument("empty sample");
    require_finite(residuals);
    require_finite(eps_new);
    std::size_t c = 0;
    for (double r : residuals)
        if (r > eps_new) ++c;
    return static_cast<double>(c) / static_cast<double>(residuals.size());
}

// One time series with an aligned design matrix and a chronological
// train/test split: rows [0, train_len) are training, the rest are the
// test period, observed one step at a time.
struct Dataset {
    Eigen::MatrixXd features;  // row t = x_t
    Eigen::VectorXd response;  // entry t = y_t
    Eigen::Index train_len = 0;
    Eigen::Index test_len = 0;

    Eigen::Index total() const { return train_len + test_len; }
    Eigen::Index dim() const { return features.cols(); }

    void validate() const {
        if (features.rows() != response.size() || total() != features.rows() ||
            train_len < 0 || test_len < 0 || features.cols() < 1)
            throw std::invalid_argument("invalid value");
        if (!features.allFinite() || !response.allFinite())
            throw std::invalid_argument("invalid value");
    }
};

struct PredictionInterval {
    double center = 0.0;
    double half_width = 0.0;  // >= 0
    double alpha = 0.0;

    double lower() const { return center - half_width; }
    double upper() const { return center + half_width; }
};

// FIFO buffer of absolute residuals with fixed capacity: starts full and
// stays full, each push evicting the oldest entry.
class ResidualWindow {
public:
    ResidualWindow() = default;

    explicit ResidualWindow(std::vector<double> initial) {
        if (initial.empty()) throw std::invalid_argument("empty sample");
        for (double v : initial) {
            require_finite(v);
            if (v < 0.0) throw std::invalid_argument("invalid value");
        }
        buf_.assign(initial.begin(), initial.end());
        capacity_ = buf_.size();
    }

    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }

    void push(double residual) {
        require_finite(residual);
        if (residual < 0.0) throw std::invalid_argument("invalid value");
        buf_.pop_front();
        buf_.push_back(residual);
    }

    std::vector<double> values() const { return {buf_.begin(), buf_.end()}; }

    double quantile(double level) const { return empirical_quantile(values(), level); }

    double p_value(double eps_new) const { return empirical_p_value(values(), eps_new); }

private:
    std::deque<double> buf_;
    std::size_t capacity_ = 0;
};

}  // namespace enpi
