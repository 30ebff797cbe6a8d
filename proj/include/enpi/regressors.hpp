#pragma once

// Pluggable base regressors with deterministic seeded fitting.
//
//   ridge  - closed form through an eigendecomposition of the smaller Gram
//            matrix, penalty chosen from a grid by generalized
//            cross-validation (GCV)
//   lasso  - cyclic coordinate descent with soft-thresholding, GCV with
//            effective degrees of freedom = number of nonzero coefficients
//   forest - depth-limited regression trees grown on the full sample (no
//            within-forest bagging; the ensemble layer above supplies
//            bootstrap resampling), MSE split criterion, random feature
//            subset of size ceil(sqrt(d)) per split
//
// Linear families standardize features (mean 0, unit population variance)
// and center the response before fitting, then map coefficients back; GCV
// and the lasso threshold are scale-sensitive, so fits are comparable
// across feature scalings. Set RegressorSpec::standardize = false to fit
// the raw design with no intercept (useful for closed-form checks).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "enpi/rng.hpp"

namespace enpi {

enum class Family { ridge, lasso, forest };

struct RegressorSpec {
    Family family = Family::ridge;
    int grid_size = 10;        // penalty grid: grid_size uniform points
    double grid_min = 1e-4;    // over [grid_min, grid_max]
    double grid_max = 10.0;
    int n_trees = 10;
    int max_depth = 2;
    std::uint64_t seed = 0;
    bool standardize = true;

    std::vector<double> penalty_grid() const {
        if (grid_size < 1 || !(grid_min > 0.0) || grid_max < grid_min)
            throw std::invalid_argument("invalid value");
        std::vector<double> g(static_cast<std::size_t>(grid_size));
        if (grid_size == 1) {
            g[0] = grid_min;
        } else {
            double step = (grid_max - grid_min) / (grid_size - 1);
            for (int i = 0; i < grid_size; ++i) g[static_cast<std::size_t>(i)] = grid_min + step * i;
        }
        return g;
    }
};

namespace detail {

struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    void fit(const Eigen::MatrixXd& X) {
        mean = X.colwise().mean();
        Eigen::MatrixXd c = X.rowwise() - mean;
        scale = (c.array().square().colwise().mean()).sqrt();
        for (Eigen::Index j = 0; j < scale.size(); ++j)
            if (!(scale(j) > 1e-300)) scale(j) = 1.0;  // constant column
    }

    Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const {
        return (X.rowwise() - mean).array().rowwise() / scale.array();
    }
};

// Eigendecomposition of the smaller Gram matrix of A, shared across the
// whole penalty grid. Spectra of A'A and AA' coincide on the nonzero part,
// so trace(H) and the ridge solution come out of either side.
struct RidgeSolver {
    Eigen::MatrixXd A;
    Eigen::VectorXd v;
    Eigen::MatrixXd eigvecs;  // of the smaller Gram matrix
    Eigen::VectorXd eigvals;  // >= 0, ascending
    Eigen::VectorXd proj;     // eigvecs' * (A v or v, see wide)
    bool wide = false;        // true: decomposed A A' (n <= d)
    double n = 0;

    void compute(const Eigen::MatrixXd& A_, const Eigen::VectorXd& v_) {
        A = A_;
        v = v_;
        n = static_cast<double>(A.rows());
        wide = A.rows() <= A.cols();
        Eigen::MatrixXd gram = wide ? Eigen::MatrixXd(A * A.transpose())
                                    : Eigen::MatrixXd(A.transpose() * A);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.info() != Eigen::Success) throw std::runtime_error("invalid value");
        eigvecs = es.eigenvectors();
        eigvals = es.eigenvalues().cwiseMax(0.0);
        proj = wide ? Eigen::VectorXd(eigvecs.transpose() * v)
                    : Eigen::VectorXd(eigvecs.transpose() * (A.transpose() * v));
    }

    double trace_hat(double lambda) const {
        return (eigvals.array() / (eigvals.array() + lambda)).sum();
    }

    double rss(double lambda) const {
        if (wide) {
            // fitted = U diag(s/(s+lambda)) U'v
            Eigen::VectorXd fitted =
                eigvecs * (eigvals.array() / (eigvals.array() + lambda) * proj.array()).matrix();
            return (v - fitted).squaredNorm();
        }
        Eigen::VectorXd beta = solve(lambda);
        return (v - A * beta).squaredNorm();
    }

    Eigen::VectorXd solve(double lambda) const {
        if (wide)  // beta = A' (AA' + lambda I)^-1 v
            return A.transpose() *
                   (eigvecs * (proj.array() / (eigvals.array() + lambda)).matrix());
        return eigvecs * (proj.array() / (eigvals.array() + lambda)).matrix();
    }

    double gcv(double lambda) const {
        double denom = 1.0 - trace_hat(lambda) / n;
        if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
        return rss(lambda) / (n * denom * denom);
    }
};

inline double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

}  // namespace detail

// GCV score for ridge on the design exactly as given (no standardization or
// centering): ||y - Hy||^2 / (n (1 - tr(H)/n)^2), H = X (X'X + lambda I)^-1 X'.
// Saturated fits (tr(H)/n >= 1) score +infinity.
inline double gcv_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("invalid value");
    if (X.rows() != y.size() || X.rows() < 1) throw std::invalid_argument("invalid value");
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("invalid value");
    detail::RidgeSolver s;
    s.compute(X, y);
    return s.gcv(lambda);
}

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    double value = 0.0;  // leaf mean
    int left = -1;
    int right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
            i = (x(nd.feature) <= nd.threshold) ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

struct FittedModel {
    Family family = Family::ridge;
    Eigen::Index dim = 0;

    // linear families
    Eigen::VectorXd coef;
    double intercept = 0.0;
    double chosen_penalty = 0.0;

    // forest
    std::vector<Tree> trees;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        if (x.size() != dim) throw std::invalid_argument("dimension mismatch");
        if (family == Family::forest) {
            double s = 0.0;
            for (const Tree& t : trees) s += t.predict(x);
            return s / static_cast<double>(trees.size());
        }
        return coef.dot(x) + intercept;
    }

    Eigen::VectorXd predict_many(const Eigen::MatrixXd& X) const {
        if (X.cols() != dim) throw std::invalid_argument("dimension mismatch");
        if (family != Family::forest)
            return (X * coef).array() + intercept;
        Eigen::VectorXd out(X.rows());
        for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict(X.row(r));
        return out;
    }
};

namespace detail {

inline FittedModel fit_ridge(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y) {
    Standardizer st;
    Eigen::MatrixXd A;
    Eigen::VectorXd v;
    double ymean = 0.0;
    if (spec.standardize) {
        st.fit(X);
        A = st.transform(X);
        ymean = y.mean();
        v = y.array() - ymean;
    } else {
        A = X;
        v = y;
    }
    RidgeSolver solver;
    solver.compute(A, v);
    double best_score = std::numeric_limits<double>::infinity();
    double best_lambda = 0.0;
    for (double lambda : spec.penalty_grid()) {
        double score = solver.gcv(lambda);
        if (score < best_score) {
            best_score = score;
            best_lambda = lambda;
        }
    }
    if (!(best_lambda > 0.0)) best_lambda = spec.penalty_grid().front();  // all saturated

    FittedModel m;
    m.family = Family::ridge;
    m.dim = X.cols();
    m.chosen_penalty = best_lambda;
    Eigen::VectorXd beta = solver.solve(best_lambda);
    if (spec.standardize) {
        m.coef = beta.array() / st.scale.transpose().array();
        m.intercept = ymean - m.coef.dot(st.mean);
    } else {
        m.coef = beta;
        m.intercept = 0.0;
    }
    return m;
}

// One coordinate-descent solve of (1/2)||v - A b||^2 + lambda ||b||_1,
// warm-started from b. Cyclic order 1..d; converged when the largest
// coefficient change in a sweep is <= 1e-6, capped at 1000 sweeps.
inline void lasso_cd(const Eigen::MatrixXd& A, const Eigen::VectorXd& v, double lambda,
                     const Eigen::VectorXd& colsq, Eigen::VectorXd& b, Eigen::VectorXd& r) {
    const Eigen::Index d = A.cols();
    for (int sweep = 0; sweep < 1000; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (colsq(j) <= 0.0) continue;
            double old = b(j);
            double z = A.col(j).dot(r) + colsq(j) * old;
            double nb = soft_threshold(z, lambda) / colsq(j);
            if (nb != old) {
                r += A.col(j) * (old - nb);
                b(j) = nb;
            }
            max_delta = std::max(max_delta, std::abs(nb - old));
        }
        if (max_delta <= 1e-6) break;
    }
}

inline FittedModel fit_lasso(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y) {
    Standardizer st;
    Eigen::MatrixXd A;
    Eigen::VectorXd v;
    double ymean = 0.0;
    if (spec.standardize) {
        st.fit(X);
        A = st.transform(X);
        ymean = y.mean();
        v = y.array() - ymean;
    } else {
        A = X;
        v = y;
    }
    const double n = static_cast<double>(A.rows());
    Eigen::VectorXd colsq = A.colwise().squaredNorm();

    Eigen::VectorXd b = Eigen::VectorXd::Zero(A.cols());
    Eigen::VectorXd r = v;
    double best_score = std::numeric_limits<double>::infinity();
    double best_lambda = 0.0;
    Eigen::VectorXd best_b = b;
    for (double lambda : spec.penalty_grid()) {
        lasso_cd(A, v, lambda, colsq, b, r);
        double df = static_cast<double>((b.array() != 0.0).count());
        double denom = 1.0 - df / n;
        double score = (denom > 0.0)
                           ? r.squaredNorm() / (n * denom * denom)
                           : std::numeric_limits<double>::infinity();
        if (score < best_score) {
            best_score = score;
            best_lambda = lambda;
            best_b = b;
        }
    }
    if (!(best_lambda > 0.0)) {
        best_lambda = spec.penalty_grid().front();
        best_b = b;
    }

    FittedModel m;
    m.family = Family::lasso;
    m.dim = X.cols();
    m.chosen_penalty = best_lambda;
    if (spec.standardize) {
        m.coef = best_b.array() / st.scale.transpose().array();
        m.intercept = ymean - m.coef.dot(st.mean);
    } else {
        m.coef = best_b;
        m.intercept = 0.0;
    }
    return m;
}

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Best MSE split over a sorted feature-subset: features are scanned in
// ascending index order and thresholds (midpoints of consecutive distinct
// values) in ascending value order, with strictly-greater gain required to
// replace the incumbent, so ties resolve to the lowest feature index and
// then the lowest threshold.
inline SplitChoice best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const std::vector<int>& samples,
                              const std::vector<int>& features) {
    SplitChoice best;
    const std::size_t n = samples.size();
    double sum = 0.0, sumsq = 0.0;
    for (int s : samples) {
        sum += y(s);
        sumsq += y(s) * y(s);
    }
    const double parent_sse = sumsq - sum * sum / static_cast<double>(n);

    std::vector<std::pair<double, double>> xy(n);
    for (int f : features) {
        for (std::size_t i = 0; i < n; ++i)
            xy[i] = {X(samples[i], f), y(samples[i])};
        std::sort(xy.begin(), xy.end());
        double lsum = 0.0, lsumsq = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            lsum += xy[i].second;
            lsumsq += xy[i].second * xy[i].second;
            if (xy[i].first == xy[i + 1].first) continue;
            double nl = static_cast<double>(i + 1);
            double nr = static_cast<double>(n) - nl;
            double rsum = sum - lsum;
            double lsse = lsumsq - lsum * lsum / nl;
            double rsse = (sumsq - lsumsq) - rsum * rsum / nr;
            double gain = parent_sse - lsse - rsse;
            if (gain > best.gain) {
                best.found = true;
                best.feature = f;
                best.threshold = 0.5 * (xy[i].first + xy[i + 1].first);
                best.gain = gain;
            }
        }
    }
    return best;
}

inline int grow_tree(Tree& tree, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     std::vector<int> samples, int depth, int max_depth, int subset_size,
                     Rng& rng) {
    TreeNode node;
    double sum = 0.0;
    for (int s : samples) sum += y(s);
    node.value = sum / static_cast<double>(samples.size());
    int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);

    if (depth >= max_depth || samples.size() < 2) return idx;

    // The feature subset is drawn even if no split is ultimately accepted;
    // preorder growth therefore consumes RNG draws in a fixed order.
    std::vector<int> features =
        rng.sample_without_replacement(static_cast<int>(X.cols()), subset_size);
    std::sort(features.begin(), features.end());
    SplitChoice sp = best_split(X, y, samples, features);
    if (!sp.found) return idx;

    std::vector<int> left, right;
    for (int s : samples)
        (X(s, sp.feature) <= sp.threshold ? left : right).push_back(s);

    tree.nodes[static_cast<std::size_t>(idx)].feature = sp.feature;
    tree.nodes[static_cast<std::size_t>(idx)].threshold = sp.threshold;
    int l = grow_tree(tree, X, y, std::move(left), depth + 1, max_depth, subset_size, rng);
    tree.nodes[static_cast<std::size_t>(idx)].left = l;
    int r = grow_tree(tree, X, y, std::move(right), depth + 1, max_depth, subset_size, rng);
    tree.nodes[static_cast<std::size_t>(idx)].right = r;
    return idx;
}

inline FittedModel fit_forest(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y) {
    if (spec.n_trees < 1 || spec.max_depth < 1) throw std::invalid_argument("invalid value");
    FittedModel m;
    m.family = Family::forest;
    m.dim = X.cols();
    int subset = static_cast<int>(
        std::ceil(std::sqrt(static_cast<double>(X.cols()))));
    subset = std::min<int>(subset, static_cast<int>(X.cols()));
    std::vector<int> all(static_cast<std::size_t>(X.rows()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    m.trees.reserve(static_cast<std::size_t>(spec.n_trees));
    for (int t = 0; t < spec.n_trees; ++t) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t)));
        Tree tree;
        grow_tree(tree, X, y, all, 0, spec.max_depth, subset, rng);
        m.trees.push_back(std::move(tree));
    }
    return m;
}

}  // namespace detail

inline FittedModel fit(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw std::invalid_argument("invalid value");
    if (X.rows() < 2) throw std::invalid_argument("insufficient data");
    if (X.cols() < 1) throw std::invalid_argument("invalid value");
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("invalid value");
    switch (spec.family) {
        case Family::ridge: return detail::fit_ridge(spec, X, y);
        case Family::lasso: return detail::fit_lasso(spec, X, y);
        case Family::forest: return detail::fit_forest(spec, X, y);
    }
    throw std::invalid_argument("invalid value");
}

}  // namespace enpi
