#ifndef DMLLAB_LEARNERS_TREE_HPP
#define DMLLAB_LEARNERS_TREE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "dmllab/learners/learner.hpp"

namespace dmllab {

namespace detail {

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
};

inline double tree_predict_row(const std::vector<TreeNode>& nodes, const double* row) {
    int cur = 0;
    while (nodes[cur].feature >= 0)
        cur = row[nodes[cur].feature] <= nodes[cur].threshold ? nodes[cur].left : nodes[cur].right;
    return nodes[cur].value;
}

/// Greedy CART builder over a fixed row set. Feature orders are
/// presorted once; node splits stably partition the per-feature order
/// segments, so each level costs O(p * m) instead of re-sorting.
/// Splitting criterion is variance reduction, which for 0/1 targets is
/// equivalent to Gini impurity, so regression and probability tasks
/// share one scan. Ties break to the lowest feature index, then the
/// smallest threshold (features are scanned ascending and a split must
/// strictly improve).
class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::vector<int> local_to_row)
        : m_(local_to_row.size()), p_(x.cols()), rows_(std::move(local_to_row)) {
        colvals_.resize(p_ * m_);
        for (std::size_t j = 0; j < p_; ++j) {
            double* col = colvals_.data() + j * m_;
            for (std::size_t t = 0; t < m_; ++t) col[t] = x(static_cast<std::size_t>(rows_[t]), j);
        }
        base_order_.resize(p_ * m_);
        std::vector<int> ids(m_);
        std::iota(ids.begin(), ids.end(), 0);
        for (std::size_t j = 0; j < p_; ++j) {
            const double* col = colvals_.data() + j * m_;
            std::vector<int> o = ids;
            std::stable_sort(o.begin(), o.end(),
                             [col](int a, int b) { return col[a] < col[b]; });
            std::copy(o.begin(), o.end(), base_order_.begin() + static_cast<long>(j * m_));
        }
    }

    /// Presort borrowed from an existing builder over the full row set,
    /// expanded to a bootstrap multiset given per-row draw counts. Costs
    /// O(p * (n + m)) instead of re-sorting the multiset.
    TreeBuilder(const TreeBuilder& full, const std::vector<int>& counts)
        : p_(full.p_) {
        std::vector<int> offset(full.m_ + 1, 0);
        for (std::size_t t = 0; t < full.m_; ++t) offset[t + 1] = offset[t] + counts[t];
        m_ = static_cast<std::size_t>(offset[full.m_]);
        rows_.resize(m_);
        std::vector<int> src_local(m_);
        for (std::size_t t = 0; t < full.m_; ++t)
            for (int c = 0; c < counts[t]; ++c) {
                const std::size_t id = static_cast<std::size_t>(offset[t] + c);
                rows_[id] = full.rows_[t];
                src_local[id] = static_cast<int>(t);
            }
        colvals_.resize(p_ * m_);
        base_order_.resize(p_ * m_);
        for (std::size_t j = 0; j < p_; ++j) {
            double* col = colvals_.data() + j * m_;
            for (std::size_t t = 0; t < m_; ++t)
                col[t] = full.colvals_[j * full.m_ + static_cast<std::size_t>(src_local[t])];
            const int* src_ord = full.base_order_.data() + j * full.m_;
            int* ord = base_order_.data() + j * m_;
            std::size_t pos = 0;
            for (std::size_t t = 0; t < full.m_; ++t) {
                const int id = src_ord[t];
                for (int c = 0; c < counts[id]; ++c) ord[pos++] = offset[id] + c;
            }
        }
    }

    std::size_t sample_count() const { return m_; }
    double column_value(std::size_t feature, std::size_t local) const {
        return colvals_[feature * m_ + local];
    }

    /// Fit a tree on targets indexed by local id. mtry == p scans all
    /// features; otherwise mtry features are drawn per node from rng.
    std::vector<TreeNode> build(const std::vector<double>& y_local, std::size_t max_depth,
                                std::size_t min_leaf, std::size_t mtry, RngStream* rng) const {
        std::vector<TreeNode> nodes;
        if (m_ == 0) {
            nodes.push_back(TreeNode{});
            return nodes;
        }
        std::vector<int> ord = base_order_;
        std::vector<char> side(m_);
        std::vector<int> tmp(m_);
        std::vector<std::size_t> feat_scratch(p_);
        std::iota(feat_scratch.begin(), feat_scratch.end(), 0);

        struct Seg {
            int node;
            std::size_t begin, end, depth;
            double sum;
        };
        double root_sum = 0.0;
        for (std::size_t t = 0; t < m_; ++t) root_sum += y_local[static_cast<std::size_t>(base_order_[t])];
        nodes.push_back(TreeNode{});
        std::vector<Seg> frontier{{0, 0, m_, 0, root_sum}};

        while (!frontier.empty()) {
            std::vector<Seg> next;
            for (const Seg& seg : frontier) {
                const std::size_t len = seg.end - seg.begin;
                TreeNode& node = nodes[static_cast<std::size_t>(seg.node)];
                node.value = seg.sum / static_cast<double>(len);
                if (seg.depth >= max_depth || len < 2 * min_leaf) continue;

                // constant targets never split
                double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
                for (std::size_t t = seg.begin; t < seg.end; ++t) {
                    const double v = y_local[static_cast<std::size_t>(ord[t])];
                    ymin = std::min(ymin, v);
                    ymax = std::max(ymax, v);
                }
                if (ymin == ymax) continue;

                const std::size_t n_feats = std::min(mtry, p_);
                if (n_feats < p_ && rng) {
                    for (std::size_t i = 0; i < n_feats; ++i) {
                        const std::size_t j =
                            i + static_cast<std::size_t>(rng->below(p_ - i));
                        std::swap(feat_scratch[i], feat_scratch[j]);
                    }
                    std::sort(feat_scratch.begin(), feat_scratch.begin() + static_cast<long>(n_feats));
                }

                double best_score = seg.sum * seg.sum / static_cast<double>(len);
                int best_feat = -1;
                double best_thr = 0.0;
                for (std::size_t fi = 0; fi < n_feats; ++fi) {
                    const std::size_t j = (n_feats < p_) ? feat_scratch[fi] : fi;
                    const double* col = colvals_.data() + j * m_;
                    const int* o = ord.data() + j * m_ + seg.begin;
                    double sum_l = 0.0;
                    for (std::size_t t = 0; t + 1 < len; ++t) {
                        const int id = o[t];
                        sum_l += y_local[static_cast<std::size_t>(id)];
                        const double v = col[id];
                        const double v_next = col[o[t + 1]];
                        if (v == v_next) continue;
                        const std::size_t cnt_l = t + 1, cnt_r = len - cnt_l;
                        if (cnt_l < min_leaf || cnt_r < min_leaf) continue;
                        const double sum_r = seg.sum - sum_l;
                        const double score = sum_l * sum_l / static_cast<double>(cnt_l) +
                                             sum_r * sum_r / static_cast<double>(cnt_r);
                        if (score > best_score) {
                            best_score = score;
                            best_feat = static_cast<int>(j);
                            best_thr = 0.5 * (v + v_next);
                        }
                    }
                }
                if (best_feat < 0) continue;

                const double* col = colvals_.data() + static_cast<std::size_t>(best_feat) * m_;
                double sum_left = 0.0;
                std::size_t cnt_left = 0;
                for (std::size_t t = seg.begin; t < seg.end; ++t) {
                    const int id = ord[static_cast<std::size_t>(best_feat) * m_ + t];
                    const bool l = col[id] <= best_thr;
                    side[static_cast<std::size_t>(id)] = l;
                    if (l) {
                        sum_left += y_local[static_cast<std::size_t>(id)];
                        ++cnt_left;
                    }
                }
                for (std::size_t j = 0; j < p_; ++j) {
                    int* o = ord.data() + j * m_;
                    std::size_t l = seg.begin, r = 0;
                    for (std::size_t t = seg.begin; t < seg.end; ++t) {
                        const int id = o[t];
                        if (side[static_cast<std::size_t>(id)]) o[l++] = id;
                        else tmp[r++] = id;
                    }
                    std::copy(tmp.begin(), tmp.begin() + static_cast<long>(r),
                              o + seg.begin + cnt_left);
                }

                const int left_idx = static_cast<int>(nodes.size());
                nodes.push_back(TreeNode{});
                nodes.push_back(TreeNode{});
                TreeNode& parent = nodes[static_cast<std::size_t>(seg.node)];
                parent.feature = best_feat;
                parent.threshold = best_thr;
                parent.left = left_idx;
                parent.right = left_idx + 1;
                next.push_back({left_idx, seg.begin, seg.begin + cnt_left, seg.depth + 1, sum_left});
                next.push_back({left_idx + 1, seg.begin + cnt_left, seg.end, seg.depth + 1,
                                seg.sum - sum_left});
            }
            frontier = std::move(next);
        }
        return nodes;
    }

private:
    std::size_t m_ = 0;
    std::size_t p_ = 0;
    std::vector<int> rows_;
    std::vector<double> colvals_;  // column-major values per local id
    std::vector<int> base_order_;  // per-feature presorted local ids
};

struct TreeModelImpl final : FittedModel::Impl {
    std::vector<TreeNode> nodes;

    std::vector<double> predict(const Matrix& x) const override {
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) out[i] = tree_predict_row(nodes, x.row_ptr(i));
        return out;
    }

    nlohmann::json parameters_json() const override {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& n : nodes)
            arr.push_back({{"feature", n.feature},
                           {"threshold", n.threshold},
                           {"value", n.value},
                           {"left", n.left},
                           {"right", n.right}});
        return {{"nodes", arr}};
    }
};

} // namespace detail

/// CART regression/probability tree: greedy exhaustive scan over
/// midpoints of sorted distinct feature values, every leaf holding at
/// least min_leaf rows.
inline FittedModel fit_tree(const Matrix& x, const std::vector<double>& y, std::size_t max_depth,
                            std::size_t min_leaf, Task task) {
    detail::check_training_inputs(x, y);
    if (min_leaf < 1) throw std::invalid_argument("fit_tree: min_leaf must be >= 1");
    if (task == Task::probability)
        for (double v : y)
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("fit_tree: probability task needs 0/1 targets");

    std::vector<int> rows(x.rows());
    std::iota(rows.begin(), rows.end(), 0);
    detail::TreeBuilder builder(x, rows);
    auto impl = std::make_shared<detail::TreeModelImpl>();
    impl->nodes = builder.build(y, max_depth, min_leaf, x.cols(), nullptr);

    LearnerConfig cfg;
    cfg.family = LearnerFamily::tree;
    cfg.task = task;
    cfg.hyperparams = {{"max_depth", static_cast<double>(max_depth)},
                       {"min_leaf", static_cast<double>(min_leaf)}};
    return FittedModel(std::move(cfg), x.cols(), impl);
}

} // namespace dmllab

#endif
