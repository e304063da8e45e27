#include "modfuse/forest.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <string>
#include <thread>

namespace modfuse::forest {

namespace {

__extension__ using u128 = unsigned __int128;

// Weighted Gini is minimised by maximising
//   purity = (l0^2 + l1^2) / nl + (r0^2 + r1^2) / nr,
// kept as an exact fraction so candidate comparison is free of rounding.
struct Purity {
    u128 num = 0;
    u128 den = 1;

    static Purity of(const ClassCounts& left, const ClassCounts& right)
    {
        const u128 nl = left[0] + left[1];
        const u128 nr = right[0] + right[1];
        const u128 a = u128(left[0]) * left[0] + u128(left[1]) * left[1];
        const u128 b = u128(right[0]) * right[0] + u128(right[1]) * right[1];
        return Purity{a * nr + b * nl, nl * nr};
    }

    bool operator>(const Purity& other) const { return num * other.den > other.num * den; }
};

double weighted_gini(const ClassCounts& left, const ClassCounts& right)
{
    const double nl = static_cast<double>(left[0] + left[1]);
    const double nr = static_cast<double>(right[0] + right[1]);
    return (nl * gini(left) + nr * gini(right)) / (nl + nr);
}

double midpoint(double lo, double hi)
{
    const double mid = lo + (hi - lo) / 2.0;
    // adjacent doubles: keep lo on the left side
    return mid > lo ? mid : hi;
}

ClassCounts count_classes(std::span<const Sample> samples, std::span<const std::size_t> idx)
{
    ClassCounts c{};
    for (std::size_t i : idx) {
        c[static_cast<std::size_t>(samples[i].label)] += 1;
    }
    return c;
}

struct Candidate {
    SplitChoice choice;
    Purity purity;
};

std::optional<Candidate> best_split_idx(std::span<const Sample> samples,
                                        std::span<const std::size_t> idx,
                                        std::span<const Feature> features,
                                        std::size_t min_samples_leaf)
{
    std::vector<Feature> ordered(features.begin(), features.end());
    std::sort(ordered.begin(), ordered.end());
    ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

    const ClassCounts total = count_classes(samples, idx);
    const std::size_t n = idx.size();
    const std::size_t min_leaf = std::max<std::size_t>(min_samples_leaf, 1);
    std::optional<Candidate> best;
    std::vector<std::size_t> sorted(idx.begin(), idx.end());

    for (Feature f : ordered) {
        const auto fi = static_cast<std::size_t>(f);
        std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
            return samples[a].features[fi] < samples[b].features[fi];
        });
        ClassCounts left{};
        for (std::size_t k = 0; k + 1 < n; ++k) {
            left[static_cast<std::size_t>(samples[sorted[k]].label)] += 1;
            const double lo = samples[sorted[k]].features[fi];
            const double hi = samples[sorted[k + 1]].features[fi];
            if (!(lo < hi)) {
                continue;
            }
            const std::size_t n_left = k + 1;
            if (n_left < min_leaf || n - n_left < min_leaf) {
                continue;
            }
            const ClassCounts right{total[0] - left[0], total[1] - left[1]};
            const Purity purity = Purity::of(left, right);
            // strict improvement only: earlier feature / lower threshold wins ties
            if (!best || purity > best->purity) {
                best = Candidate{SplitChoice{f, midpoint(lo, hi), weighted_gini(left, right)},
                                 purity};
            }
        }
    }
    return best;
}

class TreeBuilder {
public:
    TreeBuilder(std::span<const Sample> samples, const ForestConfig& cfg, Rng& rng)
        : samples_(samples), cfg_(cfg), rng_(rng)
    {
    }

    Tree build(std::vector<std::size_t> idx)
    {
        grow(std::move(idx), 0);
        return std::move(tree_);
    }

private:
    void grow(std::vector<std::size_t> idx, std::size_t depth)
    {
        const std::size_t node_index = tree_.nodes.size();
        TreeNode node;
        node.counts = count_classes(samples_, idx);
        tree_.nodes.push_back(node);

        const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
        const bool depth_capped = cfg_.max_depth && depth >= *cfg_.max_depth;
        if (pure || depth_capped || idx.size() < 2 * cfg_.min_samples_leaf) {
            return;
        }

        std::optional<Candidate> split;
        if (cfg_.features_per_split >= kNumFeatures) {
            const std::array<Feature, 2> all{Feature::nlp, Feature::cv};
            split = best_split_idx(samples_, idx, all, cfg_.min_samples_leaf);
        } else {
            const auto drawn = static_cast<Feature>(rng_.below(kNumFeatures));
            const std::array<Feature, 1> one{drawn};
            split = best_split_idx(samples_, idx, one, cfg_.min_samples_leaf);
            if (!split) {
                // drawn feature is constant here; fall back to the other one
                const std::array<Feature, 1> other{
                    drawn == Feature::nlp ? Feature::cv : Feature::nlp};
                split = best_split_idx(samples_, idx, other, cfg_.min_samples_leaf);
            }
        }
        if (!split) {
            return;
        }

        const auto fi = static_cast<std::size_t>(split->choice.feature);
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t i : idx) {
            (samples_[i].features[fi] < split->choice.threshold ? left : right).push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        tree_.nodes[node_index].kind = TreeNode::Kind::split;
        tree_.nodes[node_index].feature = split->choice.feature;
        tree_.nodes[node_index].threshold = split->choice.threshold;
        grow(std::move(left), depth + 1);
        tree_.nodes[node_index].right = tree_.nodes.size();
        grow(std::move(right), depth + 1);
    }

    std::span<const Sample> samples_;
    const ForestConfig& cfg_;
    Rng& rng_;
    Tree tree_;
};

void check_samples(std::span<const Sample> samples)
{
    if (samples.empty()) {
        throw ForestError("cannot fit a tree on zero samples");
    }
    for (const auto& s : samples) {
        if (s.label != 0 && s.label != 1) {
            throw ForestError("sample labels must be 0 or 1");
        }
    }
}

} // namespace

void ForestConfig::validate() const
{
    if (n_trees == 0) {
        throw ForestError("n_trees must be positive");
    }
    if (max_depth && *max_depth == 0) {
        throw ForestError("max_depth must be positive (omit it for unlimited)");
    }
    if (min_samples_leaf == 0) {
        throw ForestError("min_samples_leaf must be positive");
    }
    if (features_per_split < 1 || features_per_split > kNumFeatures) {
        throw ForestError("features_per_split must be 1 or 2");
    }
}

double gini(const ClassCounts& counts)
{
    const auto total = counts[0] + counts[1];
    if (total == 0) {
        throw ForestError("gini of an empty node is undefined");
    }
    const double p0 = static_cast<double>(counts[0]) / static_cast<double>(total);
    const double p1 = static_cast<double>(counts[1]) / static_cast<double>(total);
    return 1.0 - (p0 * p0 + p1 * p1);
}

std::optional<SplitChoice> best_split(std::span<const Sample> samples,
                                      std::span<const Feature> features,
                                      std::size_t min_samples_leaf)
{
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto best = best_split_idx(samples, idx, features, min_samples_leaf);
    if (!best) {
        return std::nullopt;
    }
    return best->choice;
}

std::size_t Tree::leaf_index(const FeatureVector& x) const
{
    if (nodes.empty()) {
        throw ForestError("empty tree");
    }
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? i + 1 : n.right;
    }
    return i;
}

double Tree::predict_proba(const FeatureVector& x) const
{
    const auto& leaf = nodes[leaf_index(x)];
    const auto total = leaf.counts[0] + leaf.counts[1];
    return total == 0 ? 0.0 : static_cast<double>(leaf.counts[1]) / static_cast<double>(total);
}

std::size_t Tree::depth() const
{
    // preorder walk with an explicit depth stack
    std::size_t max_depth = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        max_depth = std::max(max_depth, d);
        if (!nodes[i].is_leaf()) {
            stack.emplace_back(i + 1, d + 1);
            stack.emplace_back(nodes[i].right, d + 1);
        }
    }
    return max_depth;
}

double Forest::predict_proba(const FeatureVector& x) const
{
    if (trees.empty()) {
        throw ForestError("forest has no trees");
    }
    double sum = 0.0;
    for (const auto& t : trees) {
        sum += t.predict_proba(x);
    }
    return sum / static_cast<double>(trees.size());
}

Tree fit_tree(std::span<const Sample> samples, const ForestConfig& cfg, Rng& rng)
{
    check_samples(samples);
    cfg.validate();
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return TreeBuilder(samples, cfg, rng).build(std::move(idx));
}

Forest fit_forest(std::span<const Sample> samples, const ForestConfig& cfg, unsigned threads)
{
    check_samples(samples);
    cfg.validate();
    const bool has_pos = std::any_of(samples.begin(), samples.end(),
                                     [](const Sample& s) { return s.label == 1; });
    const bool has_neg = std::any_of(samples.begin(), samples.end(),
                                     [](const Sample& s) { return s.label == 0; });
    if (!has_pos || !has_neg) {
        throw ForestError("forest training needs both classes present");
    }

    Forest forest;
    forest.config = cfg;
    forest.trees.resize(cfg.n_trees);

    const auto fit_one = [&](std::size_t t) {
        Rng rng = Rng::stream(cfg.seed, t);
        std::vector<std::size_t> idx(samples.size());
        if (cfg.bootstrap) {
            for (auto& i : idx) {
                i = static_cast<std::size_t>(rng.below(samples.size()));
            }
        } else {
            std::iota(idx.begin(), idx.end(), std::size_t{0});
        }
        forest.trees[t] = TreeBuilder(samples, cfg, rng).build(std::move(idx));
    };

    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.n_trees));
    if (threads <= 1) {
        for (std::size_t t = 0; t < cfg.n_trees; ++t) {
            fit_one(t);
        }
        return forest;
    }

    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < cfg.n_trees; t = next++) {
                    fit_one(t);
                }
            });
        }
    }
    return forest;
}

} // namespace modfuse::forest
