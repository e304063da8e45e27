#pragma once
// Late fusion of the NLP and CV modality scores. Three strategies share one
// model type: accuracy-weighted averaging, least-squares linear regression
// and a random forest. Every model emits a fused score in [0,1] and labels
// by thresholding it (score >= threshold -> 1).

#include "modfuse/dataset.hpp"
#include "modfuse/forest.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace modfuse::fusion {

class FusionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr int kModelFormatVersion = 1;
inline constexpr double kRidgeLambda = 1e-8;
inline constexpr double kRidgeConditionLimit = 1e12;

struct EnsembleWeights {
    double w_nlp = 0.5;
    double w_cv = 0.5;
    double acc_nlp = 0.0;
    double acc_cv = 0.0;
};

struct LinearModel {
    double intercept = 0.0;
    double coef_nlp = 0.0;
    double coef_cv = 0.0;

    // Unclamped regression output.
    double raw(double score_nlp, double score_cv) const noexcept
    {
        return intercept + coef_nlp * score_nlp + coef_cv * score_cv;
    }
};

enum class ModelKind { weighted_average, linear, random_forest };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind model_kind_from_string(std::string_view name);

struct FusionModel {
    std::variant<EnsembleWeights, LinearModel, forest::Forest> params;
    double threshold = kDefaultThreshold;

    ModelKind kind() const noexcept { return static_cast<ModelKind>(params.index()); }
};

// Accuracy of thresholding one modality's raw score at `threshold`.
double modality_accuracy(const ScoreDataset& ds, bool nlp, double threshold = kDefaultThreshold);

// w_nlp = acc_nlp / (acc_nlp + acc_cv), w_cv likewise, with the accuracies
// measured on `train` at threshold 0.5.
FusionModel fit_weighted_average(const ScoreDataset& train);
EnsembleWeights weights_from_accuracies(double acc_nlp, double acc_cv);

struct LinearFit {
    LinearModel model;
    bool ridge_applied = false;
    double condition_estimate = 0.0; // of the Gram matrix before any ridge
};

// OLS of label on (1, score_nlp, score_cv) through the normal equations.
// When the Gram matrix condition number exceeds 1e12, kRidgeLambda is added
// to its diagonal.
LinearFit fit_linear_detailed(const ScoreDataset& train);
FusionModel fit_linear(const ScoreDataset& train);

FusionModel fit_forest(const ScoreDataset& train, const forest::ForestConfig& cfg,
                       unsigned threads = 1);

std::vector<forest::Sample> to_samples(const ScoreDataset& ds);

// Fused score in [0,1] for one record.
double predict_score(const FusionModel& m, const ScoredRecord& r);

std::vector<double> predict_scores(const FusionModel& m, const ScoreDataset& ds);
std::vector<int> predict_labels(const FusionModel& m, const ScoreDataset& ds);

// Text (JSON) model file: format_version, kind, threshold and parameters in
// round-trip decimal precision. Forest trees are preorder node lists
// [kind, feature, threshold, count0, count1]. `manifest` names the run
// manifest that produced the file and is omitted when empty.
std::string serialize_model(const FusionModel& m, std::string_view manifest = {});
FusionModel parse_model(std::string_view text);

void save_model(const FusionModel& m, const std::filesystem::path& path,
                std::string_view manifest = {});
FusionModel load_model(const std::filesystem::path& path);

} // namespace modfuse::fusion
