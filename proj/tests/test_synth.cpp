#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "modfuse/fusion.hpp"
#include "modfuse/metrics.hpp"
#include "modfuse/synth.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace modfuse;
using namespace modfuse::synth;

namespace {

double auc_of(const ScoreDataset& ds, bool nlp)
{
    return metrics::auc_rank(ds.labels(), nlp ? ds.nlp_scores() : ds.cv_scores());
}

} // namespace

TEST_CASE("exact positive count")
{
    SynthConfig cfg;
    cfg.n = 5500;
    cfg.pos_fraction = 0.6;
    const auto ds = generate(cfg);
    CHECK(ds.size() == 5500);
    CHECK(ds.count_label(1) == 3300);
    CHECK(ds.count_label(0) == 2200);

    for (std::size_t n : {7u, 101u, 2000u}) {
        for (double f : {0.1, 0.35, 0.5, 0.77}) {
            cfg.n = n;
            cfg.pos_fraction = f;
            CHECK(generate(cfg).count_label(1) ==
                  static_cast<std::size_t>(std::llround(static_cast<double>(n) * f)));
        }
    }
}

TEST_CASE("output is a valid dataset with unique ids and scores in [0,1]")
{
    SynthConfig cfg;
    cfg.n = 3000;
    cfg.seed = 4;
    const auto ds = generate(cfg);
    CHECK_NOTHROW(validate(ds));
    for (const auto& r : ds.records) {
        CHECK(r.score_nlp >= 0.0);
        CHECK(r.score_nlp <= 1.0);
        CHECK(r.score_cv >= 0.0);
        CHECK(r.score_cv <= 1.0);
    }
}

TEST_CASE("seed determinism")
{
    SynthConfig cfg;
    cfg.n = 1000;
    cfg.seed = 17;
    cfg.noise_correlation = 0.4;
    CHECK(generate(cfg).records == generate(cfg).records);
    auto other = cfg;
    other.seed = 18;
    CHECK_FALSE(generate(other).records == generate(cfg).records);
}

TEST_CASE("binormal calibration formulas round-trip")
{
    for (double a : {0.51, 0.6, 0.75, 0.9, 0.93, 0.977, 0.994}) {
        CHECK(binormal_auc(separation_for_auc(a)) == doctest::Approx(a).epsilon(1e-13));
    }
    // Phi(d / sqrt 2) at d = 2 is Phi(sqrt 2)
    CHECK(binormal_auc(2.0) == doctest::Approx(0.9213503964748575).epsilon(1e-13));
    CHECK(separation_for_auc(0.5) == 0.0);
}

TEST_CASE("both targets 0.90 at n=5000 land in [0.88, 0.92]")
{
    SynthConfig cfg;
    cfg.n = 5000;
    cfg.target_auc_nlp = 0.90;
    cfg.target_auc_cv = 0.90;
    cfg.noise_correlation = 0.0;
    cfg.seed = 1;
    const auto ds = generate(cfg);
    const double nlp = auc_of(ds, true);
    const double cv = auc_of(ds, false);
    MESSAGE("nlp " << nlp << " cv " << cv);
    CHECK(nlp >= 0.88);
    CHECK(nlp <= 0.92);
    CHECK(cv >= 0.88);
    CHECK(cv <= 0.92);
}

TEST_CASE("property: empirical AUC within 0.02 of target for n >= 2000")
{
    const double targets[][2] = {{0.93, 0.90}, {0.6, 0.99}, {0.75, 0.8}, {0.97, 0.55}};
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        SynthConfig cfg;
        cfg.n = 2000 + seed * 300;
        cfg.pos_fraction = 0.3 + 0.05 * static_cast<double>(seed % 6);
        cfg.target_auc_nlp = targets[seed % 4][0];
        cfg.target_auc_cv = targets[seed % 4][1];
        cfg.noise_correlation = -0.5 + 0.1 * static_cast<double>(seed);
        cfg.seed = seed;
        const auto ds = generate(cfg);
        CAPTURE(seed);
        CHECK(std::abs(auc_of(ds, true) - cfg.target_auc_nlp) <= 0.02);
        CHECK(std::abs(auc_of(ds, false) - cfg.target_auc_cv) <= 0.02);
    }
}

TEST_CASE("perfectly correlated equal-strength modalities are redundant")
{
    SynthConfig cfg;
    cfg.n = 2500;
    cfg.target_auc_nlp = 0.88;
    cfg.target_auc_cv = 0.88;
    cfg.noise_correlation = 1.0;
    cfg.seed = 5;
    const auto ds = generate(cfg);
    for (const auto& r : ds.records) {
        CHECK(r.score_nlp == r.score_cv);
    }
    const auto m = fusion::fit_weighted_average(ds);
    const double fused = metrics::auc_rank(ds.labels(), fusion::predict_scores(m, ds));
    CHECK(std::abs(fused - auc_of(ds, true)) <= 1e-9);
}

TEST_CASE("property: independent modalities make weighted-average fusion beat both")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SynthConfig cfg;
        cfg.n = 2000 + 500 * (seed % 3);
        cfg.target_auc_nlp = 0.80 + 0.015 * static_cast<double>(seed);
        cfg.target_auc_cv = 0.92 - 0.01 * static_cast<double>(seed);
        cfg.noise_correlation = 0.0;
        cfg.seed = 100 + seed;
        const auto ds = generate(cfg);
        const auto m = fusion::fit_weighted_average(ds);
        const double fused = metrics::auc_rank(ds.labels(), fusion::predict_scores(m, ds));
        CAPTURE(seed);
        CHECK(fused > std::max(auc_of(ds, true), auc_of(ds, false)));
    }
}

TEST_CASE("invalid configurations")
{
    const auto bad = [](auto mutate) {
        SynthConfig cfg;
        mutate(cfg);
        return cfg;
    };
    CHECK_THROWS_AS(generate(bad([](SynthConfig& c) { c.n = 0; })), SynthError);
    CHECK_THROWS_AS(generate(bad([](SynthConfig& c) { c.pos_fraction = 0.0; })), SynthError);
    CHECK_THROWS_AS(generate(bad([](SynthConfig& c) { c.pos_fraction = 1.0; })), SynthError);
    CHECK_THROWS_AS(generate(bad([](SynthConfig& c) { c.target_auc_nlp = 1.0; })), SynthError);
    CHECK_THROWS_AS(generate(bad([](SynthConfig& c) { c.target_auc_cv = 0.5; })), SynthError);
    CHECK_THROWS_AS(generate(bad([](SynthConfig& c) { c.noise_correlation = 1.5; })), SynthError);
}

TEST_CASE("key=value config files")
{
    std::istringstream in("# fixture\n n = 1200\npos_fraction=0.5  # balanced\n\n"
                          "target_auc_nlp=0.8\ntarget_auc_cv=0.85\nnoise_correlation=-0.25\nseed=9\n");
    const auto cfg = parse_config(in);
    CHECK(cfg.n == 1200);
    CHECK(cfg.pos_fraction == 0.5);
    CHECK(cfg.target_auc_nlp == 0.8);
    CHECK(cfg.target_auc_cv == 0.85);
    CHECK(cfg.noise_correlation == -0.25);
    CHECK(cfg.seed == 9);

    std::istringstream partial("seed=3\n");
    SynthConfig base;
    base.n = 77;
    CHECK(parse_config(partial, base).n == 77);

    std::istringstream unknown("colour=blue\n");
    CHECK_THROWS_AS(parse_config(unknown), SynthError);
    std::istringstream no_eq("n 5\n");
    CHECK_THROWS_AS(parse_config(no_eq), SynthError);
    std::istringstream not_number("n=lots\n");
    CHECK_THROWS_AS(parse_config(not_number), SynthError);
    std::istringstream invalid("target_auc_cv=1.2\n");
    CHECK_THROWS_AS(parse_config(invalid), SynthError);
}

TEST_CASE("shipped fixture configuration")
{
    const auto cfg = shipped_fixture_config();
    CHECK(cfg.n == 5500);
    CHECK(cfg.pos_fraction == 0.6);
    CHECK(cfg.target_auc_nlp == 0.93);
    CHECK(cfg.target_auc_cv == 0.90);
    CHECK(cfg.noise_correlation == 0.0);
}
