#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "modfuse/cli.hpp"
#include "modfuse/fusion.hpp"
#include "modfuse/metrics.hpp"
#include "test_util.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <sstream>

using namespace modfuse;
using nlohmann::json;
using testutil::slurp;
using testutil::spit;
using testutil::TempDir;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string p(const TempDir& dir, const std::string& name)
{
    return (dir / name).string();
}

// synth train/test pair plus the three fitted models
void build_fixture(const TempDir& dir)
{
    REQUIRE(run({"--seed", "42", "synth", "--n", "800", "-o", p(dir, "train.csv")}).code == 0);
    REQUIRE(run({"--seed", "7", "synth", "--n", "500", "-o", p(dir, "test.csv")}).code == 0);
    REQUIRE(run({"fuse", "--model", "wa", "--train", p(dir, "train.csv"), "-o", p(dir, "wa.json")})
                .code == 0);
    REQUIRE(run({"fuse", "--model", "linreg", "--train", p(dir, "train.csv"), "-o",
                 p(dir, "lr.json")})
                .code == 0);
    REQUIRE(run({"--seed", "1", "fuse", "--model", "rf", "--n-trees", "10", "--train",
                 p(dir, "train.csv"), "-o", p(dir, "rf.json")})
                .code == 0);
}

} // namespace

TEST_CASE("synth writes the requested rows and a manifest")
{
    TempDir dir;
    const auto r = run({"synth", "--n", "5500", "--pos-fraction", "0.6", "--seed", "42", "-o",
                        p(dir, "scores.csv")});
    REQUIRE(r.code == 0);
    const auto ds = load_dataset(dir / "scores.csv");
    CHECK(ds.size() == 5500);
    CHECK(ds.count_label(1) == 3300);

    const auto manifest = json::parse(slurp(dir / "scores.csv.manifest.json"));
    CHECK(manifest["command"] == "synth");
    CHECK(manifest["tool"] == cli::kToolName);
    CHECK(manifest["seeds"]["seed"] == 42);
    CHECK(manifest["parameters"]["n"] == 5500);
    CHECK(manifest["outputs"][0]["file"] == "scores.csv");
    CHECK(manifest["outputs"][0]["sha256"] == cli::sha256_hex(slurp(dir / "scores.csv")));
}

TEST_CASE("synth is deterministic and seed-sensitive")
{
    TempDir dir;
    for (const char* name : {"a.csv", "b.csv"}) {
        REQUIRE(run({"--seed", "3", "synth", "--n", "300", "-o", p(dir, name)}).code == 0);
    }
    REQUIRE(run({"--seed", "4", "synth", "--n", "300", "-o", p(dir, "c.csv")}).code == 0);
    CHECK(cli::sha256_hex(slurp(dir / "a.csv")) == cli::sha256_hex(slurp(dir / "b.csv")));
    CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
}

TEST_CASE("synth to stdout and jsonl output")
{
    TempDir dir;
    const auto r = run({"synth", "--n", "10"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("id,label,score_nlp,score_cv\n", 0) == 0);
    CHECK(testutil::parse_csv(r.out).size() == 10);

    REQUIRE(run({"synth", "--n", "10", "-o", p(dir, "s.jsonl")}).code == 0);
    CHECK(load_dataset(dir / "s.jsonl").records == testutil::parse_csv(r.out).records);
}

TEST_CASE("usage errors exit with code 2")
{
    auto r = run({"synth"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--n") != std::string::npos);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"fuse", "--model", "svm", "--train", "x.csv"}).code == 2);
    CHECK(run({"synth", "--n", "ten"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("runtime errors exit with code 1 and a message on stderr")
{
    TempDir dir;
    const auto r = run({"fuse", "--model", "wa", "--train", p(dir, "missing.csv")});
    CHECK(r.code == 1);
    CHECK(r.err.find("missing.csv") != std::string::npos);
    CHECK(r.out.empty());

    spit(dir / "bad.csv", "id,label,score_nlp,score_cv\na,2,0.1,0.2\n");
    const auto v = run({"validate", p(dir, "bad.csv")});
    CHECK(v.code == 1);
    CHECK(v.err.find("label outside {0,1} at row 1") != std::string::npos);
}

TEST_CASE("fuse wa: weights are normalised and the file names its manifest")
{
    TempDir dir;
    build_fixture(dir);
    const auto model = json::parse(slurp(dir / "wa.json"));
    CHECK(model["format_version"] == fusion::kModelFormatVersion);
    CHECK(model["manifest"] == "wa.json.manifest.json");
    const double w_nlp = model["params"]["w_nlp"];
    const double w_cv = model["params"]["w_cv"];
    CHECK(std::abs(w_nlp + w_cv - 1.0) <= 1e-12);

    const auto manifest = json::parse(slurp(dir / "wa.json.manifest.json"));
    CHECK(manifest["inputs"][0]["file"] == "train.csv");
    CHECK(manifest["inputs"][0]["sha256"] == cli::sha256_hex(slurp(dir / "train.csv")));
}

TEST_CASE("fuse rf twice gives identical model files, whatever the thread count")
{
    TempDir a, b, c;
    for (const auto* dir : {&a, &b, &c}) {
        REQUIRE(run({"--seed", "42", "synth", "--n", "500", "-o", p(*dir, "train.csv")}).code == 0);
        REQUIRE(run({"fuse", "--model", "rf", "--n-trees", "10", "--seed", "1", "--threads",
                     dir == &c ? "4" : "1", "--train", p(*dir, "train.csv"), "-o",
                     p(*dir, "rf.json")})
                    .code == 0);
    }
    CHECK(slurp(a / "rf.json") == slurp(b / "rf.json"));
    CHECK(slurp(a / "rf.json.manifest.json") == slurp(b / "rf.json.manifest.json"));
    // the manifest records the thread count; the model itself must not differ
    CHECK(slurp(a / "rf.json") == slurp(c / "rf.json"));
}

TEST_CASE("fuse linreg on redundant modalities reports the ridge fallback")
{
    TempDir dir;
    auto ds = testutil::random_dataset(200, 3);
    for (auto& r : ds.records) {
        r.score_cv = r.score_nlp;
    }
    save_dataset(ds, dir / "redundant.csv");
    const auto r = run({"fuse", "--model", "linreg", "--train", p(dir, "redundant.csv"), "-o",
                        p(dir, "lr.json")});
    CHECK(r.code == 0);
    CHECK(r.err.find("ridge fallback applied") != std::string::npos);

    // a well-conditioned fit stays quiet
    save_dataset(testutil::random_dataset(200, 3), dir / "plain.csv");
    const auto q = run({"fuse", "--model", "linreg", "--train", p(dir, "plain.csv"), "-o",
                        p(dir, "lr2.json")});
    CHECK(q.code == 0);
    CHECK(q.err.find("ridge") == std::string::npos);
}

TEST_CASE("eval agrees with the metrics module and its own ROC file")
{
    TempDir dir;
    build_fixture(dir);
    const auto r = run({"--json", "eval", "--model", p(dir, "wa.json"), "--test",
                        p(dir, "train.csv"), "--roc-out", p(dir, "roc.csv")});
    REQUIRE(r.code == 0);
    const auto report = json::parse(r.out);

    const auto model = fusion::load_model(dir / "wa.json");
    const auto train = load_dataset(dir / "train.csv");
    const auto c = metrics::confusion(train.labels(), fusion::predict_labels(model, train));
    CHECK(report["accuracy"].get<double>() == metrics::accuracy(c));

    const auto roc_text = slurp(dir / "roc.csv");
    std::istringstream lines(roc_text);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "threshold,fpr,tpr");
    std::vector<std::pair<double, double>> pts;
    while (std::getline(lines, line) && line[0] != '#') {
        const auto a = line.find(',');
        const auto b = line.find(',', a + 1);
        pts.emplace_back(std::stod(line.substr(a + 1, b - a - 1)), std::stod(line.substr(b + 1)));
    }
    REQUIRE(pts.size() >= 2);
    CHECK(pts.front() == std::pair{0.0, 0.0});
    CHECK(pts.back() == std::pair{1.0, 1.0});
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
    }
    CHECK(report["auc"].get<double>() == doctest::Approx(area).epsilon(1e-12));

    // text mode prints AUC to three decimals
    const auto text = run({"eval", "--model", p(dir, "wa.json"), "--test", p(dir, "train.csv")});
    std::ostringstream expected;
    expected << std::fixed << std::setprecision(3) << area;
    CHECK(text.out.find("auc        " + expected.str()) != std::string::npos);
}

TEST_CASE("eval rejects a single-class test set")
{
    TempDir dir;
    build_fixture(dir);
    spit(dir / "one.csv", "id,label,score_nlp,score_cv\na,1,0.2,0.3\nb,1,0.9,0.8\n");
    const auto r = run({"eval", "--model", p(dir, "wa.json"), "--test", p(dir, "one.csv")});
    CHECK(r.code == 1);
    CHECK(r.err.find("both classes") != std::string::npos);
}

TEST_CASE("compare sorts by AUC and reports baselines")
{
    TempDir dir;
    build_fixture(dir);
    const auto r = run({"--json", "compare", "--test", p(dir, "test.csv"), p(dir, "rf.json"),
                        p(dir, "wa.json"), p(dir, "lr.json")});
    REQUIRE(r.code == 0);
    const auto table = json::parse(r.out);
    REQUIRE(table["models"].size() == 3);
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(table["models"][i - 1]["auc"].get<double>() >= table["models"][i]["auc"].get<double>());
    }
    REQUIRE(table["baselines"].size() == 2);
    const auto test = load_dataset(dir / "test.csv");
    CHECK(table["baselines"][0]["auc"].get<double>() ==
          doctest::Approx(metrics::auc_rank(test.labels(), test.nlp_scores())).epsilon(1e-12));

    const auto text = run({"compare", "--test", p(dir, "test.csv"), p(dir, "rf.json"),
                           p(dir, "wa.json"), p(dir, "lr.json")});
    REQUIRE(text.code == 0);
    const auto first_row = text.out.substr(text.out.find('\n') + 1, 2);
    CHECK(first_row == table["models"][0]["name"].get<std::string>().substr(0, 2));
}

TEST_CASE("compare breaks AUC ties by model name")
{
    TempDir dir;
    build_fixture(dir);
    std::filesystem::copy_file(dir / "wa.json", dir / "zeta.json");
    std::filesystem::copy_file(dir / "wa.json", dir / "alpha.json");
    const auto r = run({"--json", "compare", "--test", p(dir, "test.csv"), p(dir, "zeta.json"),
                        p(dir, "alpha.json")});
    REQUIRE(r.code == 0);
    const auto table = json::parse(r.out);
    CHECK(table["models"][0]["name"] == "alpha");
    CHECK(table["models"][1]["name"] == "zeta");
}

TEST_CASE("compare errors")
{
    TempDir dir;
    build_fixture(dir);
    CHECK(run({"compare", "--test", p(dir, "test.csv"), p(dir, "wa.json")}).code == 1);

    auto text = slurp(dir / "wa.json");
    text.replace(text.find("\"format_version\":1"), 18, "\"format_version\":9");
    spit(dir / "future.json", text);
    const auto r =
        run({"compare", "--test", p(dir, "test.csv"), p(dir, "wa.json"), p(dir, "future.json")});
    CHECK(r.code == 1);
    CHECK(r.err.find("future.json") != std::string::npos);
}

TEST_CASE("dropout-sweep emits one row per p and is reproducible")
{
    const std::vector<std::string> args{"--seed", "2", "dropout-sweep", "--p", "0", "0.1", "0.2",
                                        "0.5", "--epochs", "15"};
    const auto a = run(args);
    const auto b = run(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    std::istringstream lines(a.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "p,trainset_accuracy,testset_accuracy");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
    }
    CHECK(rows == 4);

    TempDir dir;
    const auto j = run({"--json", "dropout-sweep", "--p", "0", "0.5", "--epochs", "5",
                        "--report-prefix", p(dir, "rep_")});
    REQUIRE(j.code == 0);
    const auto sweep = json::parse(j.out);
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[1]["p"] == 0.5);
    CHECK(std::filesystem::exists(dir / "rep_p0.csv"));
    CHECK(std::filesystem::exists(dir / "rep_p0.5.csv"));

    CHECK(run({"dropout-sweep", "--p", "1.0", "--epochs", "5"}).code == 1);
    CHECK(run({"dropout-sweep", "--p", "-0.1", "--epochs", "5"}).code == 1);
}

TEST_CASE("validate summarises a good file")
{
    TempDir dir;
    spit(dir / "ok.csv", slurp(std::filesystem::path(MODFUSE_TEST_DATA) / "six_rows.csv"));
    const auto r = run({"validate", p(dir, "ok.csv")});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("ok: 6 records", 0) == 0);
}

TEST_CASE("config file supplies flags the command line leaves unset")
{
    TempDir dir;
    spit(dir / "run.cfg", "# shared settings\nn = 120\npos_fraction = 0.25\nseed = 11\n");
    const auto r = run({"--config", p(dir, "run.cfg"), "synth", "-o", p(dir, "a.csv")});
    REQUIRE(r.code == 0);
    const auto ds = load_dataset(dir / "a.csv");
    CHECK(ds.size() == 120);
    CHECK(ds.count_label(1) == 30);

    // flags win over the file
    REQUIRE(run({"--config", p(dir, "run.cfg"), "synth", "--n", "40", "-o", p(dir, "b.csv")}).code ==
            0);
    CHECK(load_dataset(dir / "b.csv").size() == 40);

    REQUIRE(run({"--seed", "11", "synth", "--n", "120", "--pos-fraction", "0.25", "-o",
                 p(dir, "c.csv")})
                .code == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "c.csv"));

    CHECK(run({"--config", p(dir, "nope.cfg"), "synth"}).code == 2);
}
