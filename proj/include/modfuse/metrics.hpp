#pragma once
// Binary classification metrics: confusion counts, accuracy, precision,
// recall, F1 / macro-F1, cross-entropy, ROC curves and AUC.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace modfuse::metrics {

class MetricsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Class 1 is the positive class. The *_neg fields are the same metrics with
// class 0 treated as positive; macro_* average the two.
struct BinaryMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double precision_neg = 0.0;
    double recall_neg = 0.0;
    double f1_neg = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions);

double accuracy(const ConfusionCounts& c);

// Zero denominators give 0 rather than NaN; F1 is 0 when precision or recall is 0.
// accuracy is 0 for an empty count set.
BinaryMetrics precision_recall_f1(const ConfusionCounts& c);

double f1_from(double precision, double recall) noexcept;

inline constexpr double kCrossEntropyClamp = 1e-12;

// H(p, q) = -sum p(x) ln q(x), with q clamped to [1e-12, 1].
double cross_entropy(std::span<const double> p, std::span<const double> q);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    // Predict positive when score >= threshold. The (0,0) anchor carries +inf.
    double threshold = std::numeric_limits<double>::infinity();
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

// One point per distinct score, swept in descending order, after a (0,0)
// anchor; the lowest score lands on (1,1). Tied scores share a point, so the
// trapezoid rule gives the tie-aware (half credit) AUC.
RocCurve roc_curve(std::span<const int> labels, std::span<const double> scores);

// Trapezoidal area under an ordered point list.
double trapezoid_auc(std::span<const RocPoint> points) noexcept;

// Mann-Whitney formulation: (#pos > neg pairs + 0.5 #ties) / (#pos * #neg),
// computed from mid-ranks in O(n log n).
double auc_rank(std::span<const int> labels, std::span<const double> scores);

// CSV with header `threshold,fpr,tpr` and a trailing `# auc=<value>` line.
void write_roc_csv(const RocCurve& roc, std::ostream& out);

} // namespace modfuse::metrics
