#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mitotype/error.hpp"
#include "mitotype/parallel.hpp"
#include "mitotype/random.hpp"

namespace mitotype {

/// Dense row-major design matrix with integer class labels 0..num_classes-1.
struct Dataset {
    std::size_t dim = 0;
    std::size_t num_classes = 3;
    std::vector<double> x;
    std::vector<std::size_t> y;

    std::size_t rows() const noexcept { return y.size(); }
    std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
    double at(std::size_t i, std::size_t j) const { return x[i * dim + j]; }

    void add(std::span<const double> values, std::size_t label) {
        if (rows() == 0 && dim == 0) dim = values.size();
        if (values.size() != dim) throw Error(ErrorCode::dimension_mismatch, "dataset row");
        if (label >= num_classes) throw Error(ErrorCode::invalid_argument, "label out of range");
        x.insert(x.end(), values.begin(), values.end());
        y.push_back(label);
    }
};

/// Defaults follow the usual R randomForest classification settings.
struct TrainConfig {
    std::size_t n_trees = 50;
    std::size_t mtry = 0; ///< 0 means floor(sqrt(dim)), at least 1
    std::size_t min_node_size = 1;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    std::size_t effective_mtry(std::size_t dim) const {
        std::size_t m = mtry ? mtry : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(dim))));
        return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(1, dim));
    }
};

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
};

namespace detail {

using u128 = unsigned __int128;

// A split's quality is sum_k cl_k^2 / nL + sum_k cr_k^2 / nR (the Gini
// decrease up to terms shared by all splits of the node). Kept as an exact
// fraction so equal decreases compare equal and tie-breaking is stable.
struct Score {
    u128 num = 0;
    u128 den = 1;

    bool greater_than(const Score& o) const { return num * o.den > o.num * den; }
};

inline Score split_score(std::uint64_t sl, std::uint64_t nl, std::uint64_t sr, std::uint64_t nr) {
    return {static_cast<u128>(sl) * nr + static_cast<u128>(sr) * nl, static_cast<u128>(nl) * nr};
}

inline std::uint64_t sum_squares(std::span<const std::uint64_t> c) {
    std::uint64_t s = 0;
    for (auto v : c) s += v * v;
    return s;
}

} // namespace detail

/// Best Gini split of the given samples over the given features. Candidate
/// thresholds are midpoints between consecutive distinct values; samples
/// with value <= threshold go left. Equal decreases resolve to the lowest
/// feature index, then the lowest threshold. Returns found = false when no
/// split strictly lowers impurity.
inline SplitChoice find_best_split(const Dataset& data, std::span<const std::size_t> samples,
                                   std::span<const std::size_t> features) {
    const std::size_t k = data.num_classes;
    const std::uint64_t n = samples.size();
    std::vector<std::uint64_t> total(k, 0);
    for (auto s : samples) ++total[data.y[s]];
    const detail::Score parent{detail::sum_squares(total), n};

    std::vector<std::size_t> sorted_features(features.begin(), features.end());
    std::sort(sorted_features.begin(), sorted_features.end());

    SplitChoice best;
    detail::Score best_score = parent;
    std::vector<std::pair<double, std::size_t>> column(samples.size());
    std::vector<std::uint64_t> left(k);
    for (std::size_t f : sorted_features) {
        for (std::size_t i = 0; i < samples.size(); ++i) column[i] = {data.at(samples[i], f), data.y[samples[i]]};
        std::sort(column.begin(), column.end());
        std::fill(left.begin(), left.end(), 0);
        std::uint64_t sl = 0; // running sum of squared left counts
        std::uint64_t sr = detail::sum_squares(total); // running sum of squared right counts
        std::vector<std::uint64_t> right = total;
        for (std::size_t i = 0; i + 1 < column.size(); ++i) {
            const std::size_t c = column[i].second;
            sl += 2 * left[c] + 1;
            ++left[c];
            sr -= 2 * right[c] - 1;
            --right[c];
            if (column[i].first == column[i + 1].first) continue;
            const std::uint64_t nl = i + 1, nr = n - nl;
            const detail::Score score = detail::split_score(sl, nl, sr, nr);
            if (score.greater_than(best_score)) {
                best_score = score;
                double mid = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
                if (!(mid < column[i + 1].first)) mid = column[i].first;
                best = {true, f, mid};
            }
        }
    }
    return best;
}

/// Binary classification tree stored as a flat node array; node 0 is the root.
class DecisionTree {
public:
    struct Node {
        bool leaf = true;
        std::size_t feature = 0;
        double threshold = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
        std::vector<std::uint32_t> counts; ///< class counts (leaves only)

        friend bool operator==(const Node&, const Node&) = default;
    };

    /// Grows a tree on `samples` (with repetitions for bootstrap copies).
    static DecisionTree grow(const Dataset& data, std::vector<std::size_t> samples, std::size_t mtry,
                             std::size_t min_node_size, Rng& rng) {
        DecisionTree tree;
        struct Work {
            std::size_t node;
            std::vector<std::size_t> samples;
        };
        std::vector<Work> stack;
        tree.nodes_.emplace_back();
        stack.push_back({0, std::move(samples)});
        std::vector<std::size_t> pool(data.dim);

        while (!stack.empty()) {
            Work w = std::move(stack.back());
            stack.pop_back();

            std::vector<std::uint32_t> counts(data.num_classes, 0);
            for (auto s : w.samples) ++counts[data.y[s]];
            const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;

            SplitChoice split;
            if (!pure && w.samples.size() >= 2 && w.samples.size() > min_node_size) {
                // Draw mtry distinct features (partial Fisher-Yates).
                std::iota(pool.begin(), pool.end(), std::size_t{0});
                for (std::size_t i = 0; i < mtry; ++i) {
                    const std::size_t j = i + static_cast<std::size_t>(rng.below(data.dim - i));
                    std::swap(pool[i], pool[j]);
                }
                split = find_best_split(data, w.samples, std::span<const std::size_t>(pool.data(), mtry));
            }
            if (!split.found) {
                tree.nodes_[w.node].counts = std::move(counts);
                continue;
            }

            std::vector<std::size_t> left, right;
            for (auto s : w.samples) (data.at(s, split.feature) <= split.threshold ? left : right).push_back(s);
            const std::size_t li = tree.nodes_.size();
            tree.nodes_.emplace_back();
            tree.nodes_.emplace_back();
            Node& node = tree.nodes_[w.node];
            node.leaf = false;
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = li;
            node.right = li + 1;
            // Right pushed first so the left subtree is grown first.
            stack.push_back({li + 1, std::move(right)});
            stack.push_back({li, std::move(left)});
        }
        return tree;
    }

    const Node& leaf_for(std::span<const double> x) const {
        const Node* n = &nodes_[0];
        while (!n->leaf) n = &nodes_[x[n->feature] <= n->threshold ? n->left : n->right];
        return *n;
    }

    /// Majority class of the reached leaf; ties go to the lowest class index.
    std::size_t predict(std::span<const double> x) const {
        const auto& c = leaf_for(x).counts;
        return static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
    }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::vector<Node>& nodes() noexcept { return nodes_; }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    std::vector<Node> nodes_;
};

class RandomForestModel {
public:
    std::size_t dimension() const noexcept { return dim_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t tree_count() const noexcept { return trees_.size(); }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    const TrainConfig& config() const noexcept { return config_; }

    /// Per-tree bootstrap multiplicity of each training row (empty after load).
    const std::vector<std::vector<std::uint32_t>>& in_bag() const noexcept { return in_bag_; }

    std::vector<std::size_t> votes(std::span<const double> x) const {
        check_dim(x.size());
        std::vector<std::size_t> v(num_classes_, 0);
        for (const auto& t : trees_) ++v[t.predict(x)];
        return v;
    }

    /// Fraction of trees voting for each class.
    std::vector<double> predict_proba(std::span<const double> x) const {
        const auto v = votes(x);
        std::vector<double> p(num_classes_);
        for (std::size_t k = 0; k < num_classes_; ++k)
            p[k] = static_cast<double>(v[k]) / static_cast<double>(trees_.size());
        return p;
    }

    /// Majority vote; ties go to the lowest class index.
    std::size_t predict_class(std::span<const double> x) const {
        const auto v = votes(x);
        return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    }

    void add_tree(DecisionTree t) { trees_.push_back(std::move(t)); }

    friend RandomForestModel train_forest(const Dataset&, const TrainConfig&);
    friend RandomForestModel load_forest(std::istream&);

private:
    void check_dim(std::size_t d) const {
        if (d != dim_) throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(dim_) + " features, got " + std::to_string(d));
    }

    std::size_t dim_ = 0;
    std::size_t num_classes_ = 0;
    TrainConfig config_;
    std::vector<DecisionTree> trees_;
    std::vector<std::vector<std::uint32_t>> in_bag_;
};

/// Bagged ensemble of unpruned Gini trees. Tree t draws its bootstrap and
/// feature subsets from derive_seed(cfg.seed, t), so the model is the same
/// for any thread count.
inline RandomForestModel train_forest(const Dataset& data, const TrainConfig& cfg) {
    if (cfg.n_trees == 0) throw Error(ErrorCode::invalid_argument, "n_trees must be >= 1");
    if (data.rows() == 0 || data.dim == 0) throw Error(ErrorCode::degenerate_training_set, "no rows");
    if (cfg.mtry > data.dim) throw Error(ErrorCode::invalid_argument, "mtry exceeds dimension");
    std::vector<std::size_t> class_counts(data.num_classes, 0);
    for (auto y : data.y) ++class_counts[y];
    if (std::count_if(class_counts.begin(), class_counts.end(), [](auto c) { return c > 0; }) < 2)
        throw Error(ErrorCode::degenerate_training_set, "need at least two classes");

    RandomForestModel m;
    m.dim_ = data.dim;
    m.num_classes_ = data.num_classes;
    m.config_ = cfg;
    m.config_.mtry = cfg.effective_mtry(data.dim);
    m.trees_.resize(cfg.n_trees);
    m.in_bag_.assign(cfg.n_trees, std::vector<std::uint32_t>(data.rows(), 0));

    const std::size_t n = data.rows();
    parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) {
        Rng rng(derive_seed(cfg.seed, t));
        std::vector<std::size_t> bag(n);
        for (auto& b : bag) {
            b = static_cast<std::size_t>(rng.below(n));
            ++m.in_bag_[t][b];
        }
        m.trees_[t] = DecisionTree::grow(data, std::move(bag), m.config_.mtry, cfg.min_node_size, rng);
    });
    return m;
}

/// Error rate of out-of-bag votes on the training rows. Rows that fell into
/// every bootstrap sample are left out of the denominator.
inline double oob_error(const RandomForestModel& m, const Dataset& data) {
    if (m.in_bag().empty() || m.in_bag().front().size() != data.rows())
        throw Error(ErrorCode::invalid_argument, "model has no bootstrap record for these rows");
    std::size_t counted = 0, wrong = 0;
    std::vector<std::size_t> v(m.num_classes());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        std::fill(v.begin(), v.end(), 0);
        bool any = false;
        for (std::size_t t = 0; t < m.tree_count(); ++t) {
            if (m.in_bag()[t][i]) continue;
            ++v[m.trees()[t].predict(data.row(i))];
            any = true;
        }
        if (!any) continue;
        ++counted;
        const auto pred = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
        wrong += pred != data.y[i];
    }
    if (counted == 0) throw Error(ErrorCode::insufficient_trees, "no out-of-bag rows");
    return static_cast<double>(wrong) / static_cast<double>(counted);
}

/// Number of rows that are out of bag for at least one tree.
inline std::size_t oob_row_count(const RandomForestModel& m) {
    if (m.in_bag().empty()) return 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.in_bag().front().size(); ++i) {
        for (const auto& bag : m.in_bag())
            if (!bag[i]) {
                ++count;
                break;
            }
    }
    return count;
}

// ---------------------------------------------------------------------------
// Text serialization. Format version 1:
//
//   mitotype-forest 1
//   classes K dimension D trees T mtry M min_node_size S seed X
//   tree N            (then N node lines)
//   S feature threshold left right
//   L c_0 ... c_{K-1}

inline void save_forest(std::ostream& out, const RandomForestModel& m) {
    out << "mitotype-forest 1\n";
    out << "classes " << m.num_classes() << " dimension " << m.dimension() << " trees " << m.tree_count() << " mtry "
        << m.config().mtry << " min_node_size " << m.config().min_node_size << " seed " << m.config().seed << '\n';
    char buf[40];
    for (const auto& t : m.trees()) {
        out << "tree " << t.nodes().size() << '\n';
        for (const auto& n : t.nodes()) {
            if (n.leaf) {
                out << 'L';
                for (auto c : n.counts) out << ' ' << c;
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", n.threshold);
                out << "S " << n.feature << ' ' << buf << ' ' << n.left << ' ' << n.right;
            }
            out << '\n';
        }
    }
}

inline std::string forest_to_string(const RandomForestModel& m) {
    std::ostringstream s;
    save_forest(s, m);
    return s.str();
}

inline RandomForestModel load_forest(std::istream& in) {
    auto bad = [](const std::string& what) { return Error(ErrorCode::parse_error, "forest model: " + what); };
    std::string magic, key;
    int version = 0;
    if (!(in >> magic >> version) || magic != "mitotype-forest") throw bad("missing header");
    if (version != 1) throw bad("unsupported version " + std::to_string(version));
    RandomForestModel m;
    std::size_t trees = 0;
    auto expect = [&](const char* name, auto& value) {
        if (!(in >> key >> value) || key != name) throw bad(std::string("expected ") + name);
    };
    expect("classes", m.num_classes_);
    expect("dimension", m.dim_);
    expect("trees", trees);
    expect("mtry", m.config_.mtry);
    expect("min_node_size", m.config_.min_node_size);
    expect("seed", m.config_.seed);
    m.config_.n_trees = trees;
    for (std::size_t t = 0; t < trees; ++t) {
        std::size_t count = 0;
        expect("tree", count);
        DecisionTree tree;
        tree.nodes().resize(count);
        for (auto& n : tree.nodes()) {
            std::string kind;
            if (!(in >> kind)) throw bad("truncated tree");
            if (kind == "L") {
                n.leaf = true;
                n.counts.resize(m.num_classes_);
                for (auto& c : n.counts)
                    if (!(in >> c)) throw bad("bad leaf");
            } else if (kind == "S") {
                n.leaf = false;
                if (!(in >> n.feature >> n.threshold >> n.left >> n.right)) throw bad("bad split");
                if (n.feature >= m.dim_ || n.left >= count || n.right >= count) throw bad("split out of range");
            } else {
                throw bad("unknown node kind '" + kind + "'");
            }
        }
        m.trees_.push_back(std::move(tree));
    }
    return m;
}

} // namespace mitotype
