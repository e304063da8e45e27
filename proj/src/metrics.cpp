#include "modfuse/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

namespace modfuse::metrics {

namespace {

void check_binary(std::span<const int> values, const char* what)
{
    for (int v : values) {
        if (v != 0 && v != 1) {
            throw MetricsError(std::string(what) + " must be 0 or 1, got " + std::to_string(v));
        }
    }
}

double ratio(std::uint64_t num, std::uint64_t den) noexcept
{
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

struct ClassCounts {
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
};

ClassCounts check_roc_inputs(std::span<const int> labels, std::span<const double> scores)
{
    if (labels.size() != scores.size()) {
        throw MetricsError("labels and scores differ in length");
    }
    check_binary(labels, "label");
    ClassCounts counts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw MetricsError("scores must be finite");
        }
        (labels[i] == 1 ? counts.pos : counts.neg) += 1;
    }
    if (counts.pos == 0 || counts.neg == 0) {
        throw MetricsError("ROC/AUC needs both classes present");
    }
    return counts;
}

std::string shortest(double value)
{
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

} // namespace

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions)
{
    if (labels.size() != predictions.size()) {
        throw MetricsError("labels and predictions differ in length");
    }
    if (labels.empty()) {
        throw MetricsError("confusion counts need at least one pair");
    }
    check_binary(labels, "label");
    check_binary(predictions, "prediction");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            (predictions[i] == 1 ? c.tp : c.fn) += 1;
        } else {
            (predictions[i] == 1 ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

double accuracy(const ConfusionCounts& c)
{
    if (c.total() == 0) {
        throw MetricsError("accuracy of zero predictions is undefined");
    }
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double f1_from(double precision, double recall) noexcept
{
    if (precision <= 0.0 || recall <= 0.0) {
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

BinaryMetrics precision_recall_f1(const ConfusionCounts& c)
{
    BinaryMetrics m;
    m.accuracy = c.total() == 0 ? 0.0 : accuracy(c);
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.f1 = f1_from(m.precision, m.recall);
    // roles swapped: class 0 as positive
    m.precision_neg = ratio(c.tn, c.tn + c.fn);
    m.recall_neg = ratio(c.tn, c.tn + c.fp);
    m.f1_neg = f1_from(m.precision_neg, m.recall_neg);
    m.macro_recall = 0.5 * (m.recall + m.recall_neg);
    m.macro_f1 = 0.5 * (m.f1 + m.f1_neg);
    return m;
}

double cross_entropy(std::span<const double> p, std::span<const double> q)
{
    if (p.size() != q.size()) {
        throw MetricsError("cross_entropy: length mismatch");
    }
    if (p.size() < 2) {
        throw MetricsError("cross_entropy: need at least two outcomes");
    }
    const auto check = [](std::span<const double> v, const char* name) {
        double sum = 0.0;
        for (double x : v) {
            if (!std::isfinite(x) || x < 0.0) {
                throw MetricsError(std::string("cross_entropy: ") + name +
                                   " has a negative or non-finite entry");
            }
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw MetricsError(std::string("cross_entropy: ") + name + " does not sum to 1");
        }
    };
    check(p, "p");
    check(q, "q");
    double h = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) {
            continue;
        }
        h -= p[i] * std::log(std::clamp(q[i], kCrossEntropyClamp, 1.0));
    }
    return h;
}

double trapezoid_auc(std::span<const RocPoint> points) noexcept
{
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += 0.5 * (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr);
    }
    return area;
}

RocCurve roc_curve(std::span<const int> labels, std::span<const double> scores)
{
    const ClassCounts counts = check_roc_inputs(labels, scores);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.push_back(RocPoint{});
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            (labels[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        roc.points.push_back(
            RocPoint{ratio(fp, counts.neg), ratio(tp, counts.pos), threshold});
    }
    roc.auc = trapezoid_auc(roc.points);
    return roc;
}

double auc_rank(std::span<const int> labels, std::span<const double> scores)
{
    const ClassCounts counts = check_roc_inputs(labels, scores);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of doubled mid-ranks of the positives keeps everything integral.
    std::uint64_t rank_sum_x2 = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const std::uint64_t midrank_x2 = (i + 1) + j; // ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum_x2 += midrank_x2;
            }
        }
        i = j;
    }
    const std::uint64_t u_x2 = rank_sum_x2 - counts.pos * (counts.pos + 1);
    return static_cast<double>(u_x2) /
           (2.0 * static_cast<double>(counts.pos) * static_cast<double>(counts.neg));
}

void write_roc_csv(const RocCurve& roc, std::ostream& out)
{
    out << "threshold,fpr,tpr\n";
    for (const auto& p : roc.points) {
        out << (std::isinf(p.threshold) ? std::string("inf") : shortest(p.threshold)) << ','
            << shortest(p.fpr) << ',' << shortest(p.tpr) << '\n';
    }
    out << "# auc=" << shortest(roc.auc) << '\n';
}

} // namespace modfuse::metrics
