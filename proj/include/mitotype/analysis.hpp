#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mitotype/error.hpp"
#include "mitotype/feature_table.hpp"
#include "mitotype/image.hpp"
#include "mitotype/parallel.hpp"

namespace mitotype {

inline constexpr double default_kl_epsilon = 1e-10;

namespace detail {

inline std::vector<double> smoothed(const NormalizedHistogram& h, double eps) {
    std::vector<double> out(h.masses().begin(), h.masses().end());
    double total = 0.0;
    for (double& v : out) total += (v += eps);
    for (double& v : out) v /= total;
    return out;
}

} // namespace detail

/// Directed divergence sum p_i ln(p_i / q_i) after adding `epsilon` to every
/// bin of both histograms and renormalizing.
inline double kl_divergence(const NormalizedHistogram& p, const NormalizedHistogram& q, double epsilon = default_kl_epsilon) {
    if (p.bins() != q.bins()) throw Error(ErrorCode::dimension_mismatch, "histograms differ in bin count");
    if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be positive");
    const auto a = detail::smoothed(p, epsilon), b = detail::smoothed(q, epsilon);
    double kl = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) kl += a[i] * std::log(a[i] / b[i]);
    return std::max(kl, 0.0);
}

inline double kl_sym(const NormalizedHistogram& p, const NormalizedHistogram& q, double epsilon = default_kl_epsilon) {
    return 0.5 * (kl_divergence(p, q, epsilon) + kl_divergence(q, p, epsilon));
}

/// Bin-wise mean of the histograms of every class, in class order.
inline std::vector<NormalizedHistogram> class_mean_histogram(const std::vector<std::vector<NormalizedHistogram>>& by_class) {
    std::vector<NormalizedHistogram> out;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto& group = by_class[c];
        if (group.empty()) throw Error(ErrorCode::empty_class, "class " + std::to_string(c) + " has no histograms");
        std::vector<double> mean(group.front().bins(), 0.0);
        for (const auto& h : group) {
            if (h.bins() != mean.size()) throw Error(ErrorCode::dimension_mismatch, "histograms differ in bin count");
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += h.masses()[i];
        }
        double total = 0.0;
        for (double& v : mean) total += (v /= static_cast<double>(group.size()));
        for (double& v : mean) v /= total;
        out.push_back(NormalizedHistogram::from_masses(std::move(mean)));
    }
    return out;
}

/// Centered moving average over `window` bins; bins beyond the ends count
/// as zero.
inline std::vector<double> moving_average(std::span<const double> v, std::size_t window) {
    if (window == 0 || window % 2 == 0) throw Error(ErrorCode::invalid_argument, "window must be odd");
    const auto half = static_cast<std::ptrdiff_t>(window / 2), n = static_cast<std::ptrdiff_t>(v.size());
    std::vector<double> out(v.size(), 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, i - half); k <= std::min(n - 1, i + half); ++k) s += v[k];
        out[i] = s / static_cast<double>(window);
    }
    return out;
}

/// Peaks of a histogram after smoothing: local maxima (a flat top counts
/// once, at its middle) whose topographic prominence is at least
/// `min_prominence` times the highest smoothed bin. Quantization combs in
/// deconvolved channels produce many tiny maxima; the prominence floor
/// ignores them.
inline std::vector<std::size_t> significant_peaks(const NormalizedHistogram& h, std::size_t smooth_bins = 5,
                                                  double min_prominence = 0.05) {
    const auto s = moving_average(h.masses(), smooth_bins);
    const std::size_t n = s.size();
    const double top = n ? *std::max_element(s.begin(), s.end()) : 0.0;
    std::vector<std::size_t> peaks;
    if (top <= 0.0) return peaks;
    for (std::size_t i = 1; i + 1 < n;) {
        if (!(s[i] > s[i - 1])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && s[j + 1] == s[i]) ++j;
        if (j + 1 >= n || !(s[j + 1] < s[i])) {
            i = j + 1;
            continue;
        }
        double left_min = s[i], right_min = s[i];
        for (std::size_t k = i; k-- > 0;) {
            if (s[k] > s[i]) break;
            left_min = std::min(left_min, s[k]);
        }
        for (std::size_t k = j + 1; k < n; ++k) {
            if (s[k] > s[i]) break;
            right_min = std::min(right_min, s[k]);
        }
        if (s[i] - std::max(left_min, right_min) >= min_prominence * top) peaks.push_back((i + j) / 2);
        i = j + 1;
    }
    return peaks;
}

struct DissimilarityMatrix {
    std::vector<std::string> ids;
    std::vector<double> values; ///< row-major n*n

    std::size_t size() const { return ids.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * ids.size() + j]; }
};

/// Pairwise kl_sym; each upper-triangle row is filled by one task.
inline DissimilarityMatrix kl_matrix(const std::vector<NormalizedHistogram>& hists, std::vector<std::string> ids,
                                     double epsilon = default_kl_epsilon, std::size_t threads = 1) {
    if (ids.size() != hists.size()) throw Error(ErrorCode::invalid_argument, "one id per histogram required");
    DissimilarityMatrix d{std::move(ids), std::vector<double>(hists.size() * hists.size(), 0.0)};
    const std::size_t n = hists.size();
    parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) d.values[i * n + j] = kl_sym(hists[i], hists[j], epsilon);
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) d.at(i, j) = d.at(j, i);
    return d;
}

/// Euclidean distances between row vectors.
inline DissimilarityMatrix euclidean_matrix(const std::vector<std::vector<double>>& points, std::vector<std::string> ids) {
    if (ids.size() != points.size()) throw Error(ErrorCode::invalid_argument, "one id per point required");
    const std::size_t n = points.size();
    DissimilarityMatrix d{std::move(ids), std::vector<double>(n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (points[i].size() != points[j].size()) throw Error(ErrorCode::dimension_mismatch, "points differ in dimension");
            double s = 0.0;
            for (std::size_t k = 0; k < points[i].size(); ++k) s += (points[i][k] - points[j][k]) * (points[i][k] - points[j][k]);
            d.at(i, j) = d.at(j, i) = std::sqrt(s);
        }
    return d;
}

struct Embedding2D {
    std::vector<std::string> ids;
    std::vector<std::array<double, 2>> points;
    std::array<double, 2> eigenvalues{}; ///< before clamping at zero
};

/// Classical (Torgerson) scaling into two dimensions.
inline Embedding2D classical_mds(const DissimilarityMatrix& d) {
    const std::size_t n = d.size();
    if (n < 3) throw Error(ErrorCode::too_few_items, "MDS needs at least 3 items");
    if (d.values.size() != n * n) throw Error(ErrorCode::invalid_argument, "matrix size does not match ids");
    const double tol = 1e-9;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(d.at(i, i)) > tol) throw Error(ErrorCode::invalid_argument, "nonzero diagonal");
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(d.at(i, j) - d.at(j, i)) > tol * std::max(1.0, std::abs(d.at(i, j))))
                throw Error(ErrorCode::invalid_argument, "matrix is not symmetric");
    }

    Eigen::MatrixXd sq(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) sq(i, j) = d.at(i, j) * d.at(i, j);
    const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    const Eigen::MatrixXd b = -0.5 * j * sq * j;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::invalid_argument, "eigendecomposition failed");
    // Eigen returns ascending eigenvalues.
    Embedding2D e;
    e.ids = d.ids;
    e.points.assign(n, {0.0, 0.0});
    for (std::size_t axis = 0; axis < 2; ++axis) {
        const Eigen::Index col = static_cast<Eigen::Index>(n - 1 - axis);
        const double lambda = solver.eigenvalues()(col);
        e.eigenvalues[axis] = lambda;
        Eigen::VectorXd v = solver.eigenvectors().col(col);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        const double scale = std::sqrt(std::max(lambda, 0.0));
        for (std::size_t i = 0; i < n; ++i) e.points[i][axis] = scale * v(static_cast<Eigen::Index>(i));
    }
    return e;
}

/// Mean kl_sym over pairs of items with the same label and with different labels.
struct ClassSeparation {
    double intra = 0.0;
    double inter = 0.0;
};

inline ClassSeparation class_separation(const DissimilarityMatrix& d, const std::vector<std::size_t>& labels) {
    if (labels.size() != d.size()) throw Error(ErrorCode::invalid_argument, "one label per item required");
    double intra = 0, inter = 0;
    std::size_t ni = 0, ne = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = i + 1; j < d.size(); ++j) {
            if (labels[i] == labels[j]) {
                intra += d.at(i, j);
                ++ni;
            } else {
                inter += d.at(i, j);
                ++ne;
            }
        }
    if (!ni || !ne) throw Error(ErrorCode::invalid_argument, "need pairs within and across classes");
    return {intra / static_cast<double>(ni), inter / static_cast<double>(ne)};
}

inline void write_matrix_csv(std::ostream& out, const DissimilarityMatrix& d) {
    out << "id";
    for (const auto& id : d.ids) out << ',' << id;
    out << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        out << d.ids[i];
        for (std::size_t j = 0; j < d.size(); ++j) out << ',' << format_value(d.at(i, j));
        out << '\n';
    }
}

inline void write_embedding_csv(std::ostream& out, const Embedding2D& e) {
    out << "id,x,y\n";
    for (std::size_t i = 0; i < e.points.size(); ++i)
        out << e.ids[i] << ',' << format_value(e.points[i][0]) << ',' << format_value(e.points[i][1]) << '\n';
}

} // namespace mitotype
