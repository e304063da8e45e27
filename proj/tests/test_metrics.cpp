#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "modfuse/metrics.hpp"
#include "modfuse/rng.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace modfuse::metrics;
using modfuse::Rng;

namespace {

struct Labeled {
    std::vector<int> labels;
    std::vector<double> scores;
};

// Random labels (both classes) and scores quantised to `levels` values so ties occur.
Labeled random_labeled(std::size_t n, std::uint64_t seed, int levels)
{
    Rng rng(seed);
    Labeled d;
    for (std::size_t i = 0; i < n; ++i) {
        d.labels.push_back(i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2)));
        d.scores.push_back(static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) /
                           levels);
    }
    return d;
}

} // namespace

TEST_CASE("confusion examples")
{
    const std::vector<int> labels{1, 1, 0, 0};
    const std::vector<int> preds{1, 0, 1, 0};
    CHECK(confusion(labels, preds) == ConfusionCounts{1, 1, 1, 1});

    const auto same = confusion(labels, labels);
    CHECK(same.fp == 0);
    CHECK(same.fn == 0);

    CHECK_THROWS_AS(confusion(labels, std::vector<int>{1, 0}), MetricsError);
    CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<int>{}), MetricsError);
    CHECK_THROWS_AS(confusion(std::vector<int>{2}, std::vector<int>{1}), MetricsError);
}

TEST_CASE("confusion matches pair enumeration on a 20-element fixture")
{
    Rng rng(2024);
    std::vector<int> labels, preds;
    for (int i = 0; i < 20; ++i) {
        labels.push_back(static_cast<int>(rng.below(2)));
        preds.push_back(static_cast<int>(rng.below(2)));
    }
    const auto c = confusion(labels, preds);
    const auto o = oracle::pair_counts(labels, preds);
    CHECK(c.tp == static_cast<std::uint64_t>(o.tp));
    CHECK(c.fp == static_cast<std::uint64_t>(o.fp));
    CHECK(c.tn == static_cast<std::uint64_t>(o.tn));
    CHECK(c.fn == static_cast<std::uint64_t>(o.fn));
    CHECK(c.total() == 20);
}

TEST_CASE("accuracy examples")
{
    CHECK(accuracy({1, 1, 1, 1}) == 0.5);
    CHECK(accuracy({5, 0, 7, 0}) == 1.0);
    CHECK(accuracy({86, 0, 0, 14}) == doctest::Approx(0.86).epsilon(1e-15));
    CHECK_THROWS_AS(accuracy({0, 0, 0, 0}), MetricsError);
}

TEST_CASE("precision, recall and F1")
{
    const auto m = precision_recall_f1({2, 1, 0, 1});
    CHECK(m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.recall == doctest::Approx(2.0 / 3.0));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));

    CHECK(f1_from(0.4, 0.4) == doctest::Approx(0.4));

    const auto degenerate = precision_recall_f1({0, 0, 5, 0});
    CHECK(degenerate.precision == 0.0);
    CHECK(degenerate.recall == 0.0);
    CHECK(degenerate.f1 == 0.0);
    CHECK(degenerate.f1_neg == 1.0);
    CHECK(degenerate.macro_f1 == 0.5);
}

TEST_CASE("macro-F1 averages the per-class F1 with roles swapped")
{
    // tp=3 fp=1 tn=4 fn=2: class 1 P=3/4 R=3/5; class 0 P=4/6 R=4/5
    const auto m = precision_recall_f1({3, 1, 4, 2});
    const double f1_pos = 2 * 0.75 * 0.6 / (0.75 + 0.6);
    const double f1_neg = 2 * (4.0 / 6) * 0.8 / ((4.0 / 6) + 0.8);
    CHECK(m.f1 == doctest::Approx(f1_pos));
    CHECK(m.precision_neg == doctest::Approx(4.0 / 6));
    CHECK(m.recall_neg == doctest::Approx(0.8));
    CHECK(m.macro_f1 == doctest::Approx((f1_pos + f1_neg) / 2));
    CHECK(m.macro_recall == doctest::Approx((0.6 + 0.8) / 2));
    CHECK(m.accuracy == doctest::Approx(0.7));
}

TEST_CASE("property: min(P,R) <= F1 <= max(P,R)")
{
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const ConfusionCounts c{1 + rng.below(50), 1 + rng.below(50), rng.below(50),
                                1 + rng.below(50)};
        const auto m = precision_recall_f1(c);
        CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-15);
        CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-15);
        for (double v : {m.accuracy, m.precision, m.recall, m.f1, m.macro_f1}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("cross-entropy examples")
{
    CHECK(cross_entropy(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == 0.0);
    CHECK(cross_entropy(std::vector<double>{1, 0}, std::vector<double>{0.9, 0.1}) ==
          doctest::Approx(0.10536051565782628).epsilon(1e-12));
    CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}) ==
          doctest::Approx(std::numbers::ln2).epsilon(1e-12));
    // q = 0 where p > 0 is clamped to 1e-12
    CHECK(cross_entropy(std::vector<double>{0, 1}, std::vector<double>{1, 0}) ==
          doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("cross-entropy errors")
{
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}),
                    MetricsError);
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{1}, std::vector<double>{1}), MetricsError);
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.6, 0.6}, std::vector<double>{0.5, 0.5}),
                    MetricsError);
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{1.5, -0.5}),
                    MetricsError);
}

TEST_CASE("property: Gibbs inequality H(p,q) >= H(p,p)")
{
    Rng rng(17);
    for (int i = 0; i < 2000; ++i) {
        const std::size_t k = 2 + rng.below(5);
        std::vector<double> p(k), q(k);
        double sp = 0, sq = 0;
        for (std::size_t j = 0; j < k; ++j) {
            p[j] = -std::log(1.0 - rng.uniform()); // Dirichlet(1) via exponentials
            q[j] = -std::log(1.0 - rng.uniform());
            sp += p[j];
            sq += q[j];
        }
        for (std::size_t j = 0; j < k; ++j) {
            p[j] /= sp;
            q[j] /= sq;
        }
        CHECK(cross_entropy(p, q) >= cross_entropy(p, p) - 1e-12);
    }
}

TEST_CASE("roc_curve examples")
{
    const std::vector<int> labels{0, 0, 1, 1};
    const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
    const auto roc = roc_curve(labels, scores);
    CHECK(roc.auc == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(oracle::pair_auc(labels, scores) == 0.75);
    REQUIRE(roc.points.size() == 5);
    CHECK(std::isinf(roc.points.front().threshold));
    CHECK(roc.points[1].threshold == 0.8);
    CHECK(roc.points[1].tpr == 0.5);
    CHECK(roc.points[1].fpr == 0.0);

    CHECK(roc_curve(labels, std::vector<double>{0.1, 0.2, 0.8, 0.9}).auc == 1.0);

    const auto flat = roc_curve(labels, std::vector<double>{0.5, 0.5, 0.5, 0.5});
    REQUIRE(flat.points.size() == 2);
    CHECK(flat.points[1].fpr == 1.0);
    CHECK(flat.points[1].tpr == 1.0);
    CHECK(flat.auc == 0.5);
}

TEST_CASE("roc_curve rejects single-class and non-finite input")
{
    CHECK_THROWS_AS(roc_curve(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}), MetricsError);
    CHECK_THROWS_AS(roc_curve(std::vector<int>{0, 1}, std::vector<double>{0.1, NAN}), MetricsError);
    CHECK_THROWS_AS(roc_curve(std::vector<int>{0, 1}, std::vector<double>{0.1}), MetricsError);
    CHECK_THROWS_AS(auc_rank(std::vector<int>{0, 0}, std::vector<double>{0.1, 0.2}), MetricsError);
}

TEST_CASE("auc_rank examples")
{
    CHECK(auc_rank(std::vector<int>{0, 0, 1, 1}, std::vector<double>{0.1, 0.4, 0.35, 0.8}) == 0.75);
    // two pos-neg pairs, one tied and one correct: (1 + 0.5) / 2
    CHECK(auc_rank(std::vector<int>{1, 0, 0}, std::vector<double>{0.5, 0.5, 0.2}) == 0.75);
    CHECK(auc_rank(std::vector<int>{0, 0, 1, 1}, std::vector<double>{0.9, 0.8, 0.2, 0.1}) == 0.0);
}

TEST_CASE("property: ROC invariants and oracle agreement with ties")
{
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        Rng rng(seed);
        const auto d = random_labeled(2 + rng.below(120), seed, 1 + static_cast<int>(rng.below(30)));
        const auto roc = roc_curve(d.labels, d.scores);
        CHECK(roc.points.front().fpr == 0.0);
        CHECK(roc.points.front().tpr == 0.0);
        CHECK(roc.points.back().fpr == 1.0);
        CHECK(roc.points.back().tpr == 1.0);
        for (std::size_t i = 1; i < roc.points.size(); ++i) {
            CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
            CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
            CHECK(roc.points[i].threshold < roc.points[i - 1].threshold);
        }
        CHECK(std::abs(roc.auc - trapezoid_auc(roc.points)) <= 1e-12);
        const double brute = oracle::pair_auc(d.labels, d.scores);
        CHECK(std::abs(roc.auc - brute) <= 1e-9);
        CHECK(std::abs(auc_rank(d.labels, d.scores) - brute) <= 1e-9);

        std::vector<double> negated(d.scores.size());
        std::transform(d.scores.begin(), d.scores.end(), negated.begin(),
                       [](double s) { return -s; });
        CHECK(std::abs(roc.auc + roc_curve(d.labels, negated).auc - 1.0) <= 1e-9);
    }
}

TEST_CASE("ROC CSV export")
{
    const auto roc = roc_curve(std::vector<int>{0, 0, 1, 1}, std::vector<double>{0.1, 0.4, 0.35, 0.8});
    std::ostringstream out;
    write_roc_csv(roc, out);
    CHECK(out.str() == "threshold,fpr,tpr\n"
                       "inf,0,0\n"
                       "0.8,0,0.5\n"
                       "0.4,0.5,0.5\n"
                       "0.35,0.5,1\n"
                       "0.1,1,1\n"
                       "# auc=0.75\n");
}
