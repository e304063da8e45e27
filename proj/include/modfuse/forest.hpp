#pragma once
// CART classification trees and a bagged random forest over the two-score
// feature space (feature 0 = NLP score, feature 1 = CV score).

#include "modfuse/rng.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace modfuse::forest {

inline constexpr std::size_t kNumFeatures = 2;

enum class Feature : std::uint8_t { nlp = 0, cv = 1 };

using FeatureVector = std::array<double, kNumFeatures>;

struct Sample {
    FeatureVector features{};
    int label = 0;
};

class ForestError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ForestConfig {
    std::size_t n_trees = 100;
    std::optional<std::size_t> max_depth; // unlimited when empty
    std::size_t min_samples_leaf = 1;
    std::size_t features_per_split = 1;
    bool bootstrap = true;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

using ClassCounts = std::array<std::uint64_t, 2>;

// Nodes are stored in preorder. A split's left child is the next node; its
// right child sits at `right`. Splits keep the class counts that reached them.
struct TreeNode {
    enum class Kind : std::uint8_t { leaf = 0, split = 1 };

    Kind kind = Kind::leaf;
    Feature feature = Feature::nlp;
    double threshold = 0.0; // x < threshold goes left
    ClassCounts counts{};
    std::size_t right = 0;

    bool is_leaf() const noexcept { return kind == Kind::leaf; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
    std::vector<TreeNode> nodes;

    // Index of the leaf reached by x.
    std::size_t leaf_index(const FeatureVector& x) const;
    // Class-1 frequency at the leaf reached by x.
    double predict_proba(const FeatureVector& x) const;
    std::size_t depth() const;

    friend bool operator==(const Tree&, const Tree&) = default;
};

struct Forest {
    std::vector<Tree> trees;
    ForestConfig config;

    // Mean over trees of the leaf class-1 frequency.
    double predict_proba(const FeatureVector& x) const;

    friend bool operator==(const Forest&, const Forest&) = default;
};

// 1 - sum (count / total)^2
double gini(const ClassCounts& counts);

struct SplitChoice {
    Feature feature = Feature::nlp;
    double threshold = 0.0;
    double weighted_gini = 0.0; // (n_left gini_left + n_right gini_right) / n
};

// Best split over `features` among midpoints of consecutive distinct values
// that leave at least min_samples_leaf samples on each side. Ties go to the
// lowest feature, then the lowest threshold. Empty when no valid split exists.
std::optional<SplitChoice> best_split(std::span<const Sample> samples,
                                      std::span<const Feature> features,
                                      std::size_t min_samples_leaf);

// Greedy CART. rng drives the per-node feature subsets.
Tree fit_tree(std::span<const Sample> samples, const ForestConfig& cfg, Rng& rng);

// Each tree draws from Rng::stream(cfg.seed, tree_index), so the forest does
// not depend on `threads` (0 picks the hardware concurrency).
Forest fit_forest(std::span<const Sample> samples, const ForestConfig& cfg,
                  unsigned threads = 1);

} // namespace modfuse::forest
