#include "modfuse/cli.hpp"

#include "modfuse/dataset.hpp"
#include "modfuse/fusion.hpp"
#include "modfuse/metrics.hpp"
#include "modfuse/microtrain.hpp"
#include "modfuse/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

namespace modfuse::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

class CommandError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// MODFUSE_LOG = error | warn | info | debug (default warn)
LogLevel log_level_from_env()
{
    const char* raw = std::getenv("MODFUSE_LOG");
    if (raw == nullptr) {
        return LogLevel::warn;
    }
    const std::string v(raw);
    if (v == "error") {
        return LogLevel::error;
    }
    if (v == "info") {
        return LogLevel::info;
    }
    if (v == "debug") {
        return LogLevel::debug;
    }
    return LogLevel::warn;
}

class Logger {
public:
    Logger(std::ostream& err, LogLevel level) : err_(err), level_(level) {}

    void log(LogLevel at, std::string_view tag, const std::string& msg) const
    {
        if (at <= level_) {
            err_ << kToolName << ": " << tag << ": " << msg << '\n';
        }
    }
    void error(const std::string& msg) const { log(LogLevel::error, "error", msg); }
    void warn(const std::string& msg) const { log(LogLevel::warn, "notice", msg); }
    void info(const std::string& msg) const { log(LogLevel::info, "info", msg); }

private:
    std::ostream& err_;
    LogLevel level_;
};

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CommandError("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CommandError("cannot open " + path.string() + " for writing");
    }
    out << bytes;
    if (!out.flush()) {
        throw CommandError("write failed for " + path.string());
    }
}

std::string fixed(double value, int decimals)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(decimals) << value;
    return s.str();
}

// Records what a command consumed and produced. Written next to the first
// output as `<output>.manifest.json`; files are named by basename and
// identified by digest so reruns elsewhere produce identical manifests.
class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)) {}

    ordered_json& parameters() { return parameters_; }
    ordered_json& seeds() { return seeds_; }

    void add_input(const fs::path& path, std::string_view bytes)
    {
        inputs_.push_back({{"file", path.filename().string()}, {"sha256", sha256_hex(bytes)}});
    }

    void add_output(const fs::path& path, std::string_view bytes)
    {
        if (!primary_) {
            primary_ = path;
        }
        outputs_.push_back({{"file", path.filename().string()}, {"sha256", sha256_hex(bytes)}});
    }

    // Name the manifest will get once written; empty when nothing goes to disk.
    static std::string name_for(const fs::path& primary_output)
    {
        return primary_output.filename().string() + ".manifest.json";
    }

    void write() const
    {
        if (!primary_) {
            return;
        }
        ordered_json j;
        j["tool"] = std::string(kToolName);
        j["version"] = std::string(kToolVersion);
        j["command"] = command_;
        j["parameters"] = parameters_;
        j["seeds"] = seeds_;
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        fs::path target = *primary_;
        target.replace_filename(name_for(*primary_));
        write_file(target, j.dump(2) + "\n");
    }

private:
    std::string command_;
    ordered_json parameters_ = ordered_json::object();
    ordered_json seeds_ = ordered_json::object();
    ordered_json inputs_ = ordered_json::array();
    ordered_json outputs_ = ordered_json::array();
    std::optional<fs::path> primary_;
};

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool json = false;
    std::string output;
    std::string config;
};

struct Context {
    std::ostream& out;
    std::ostream& err;
    Logger log;
    GlobalOptions global;
};

// Sends bytes to the -o path (recording it in the manifest) or to stdout.
void emit(Context& ctx, Manifest& manifest, const std::string& bytes)
{
    if (ctx.global.output.empty()) {
        ctx.out << bytes;
        return;
    }
    write_file(ctx.global.output, bytes);
    manifest.add_output(ctx.global.output, bytes);
}

DataFormat resolve_format(const std::string& name, const fs::path& path)
{
    if (name.empty()) {
        return format_from_path(path);
    }
    return name == "jsonl" ? DataFormat::jsonl : DataFormat::csv;
}

ScoreDataset load_input(const fs::path& path, const std::string& format, Manifest& manifest)
{
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    ScoreDataset ds;
    try {
        ds = read_dataset(in, resolve_format(format, path));
    } catch (const DatasetError& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
    ds.provenance = path.string();
    manifest.add_input(path, bytes);
    return ds;
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
    std::size_t n = 0;
    double pos_fraction = 0.6;
    double auc_nlp = 0.93;
    double auc_cv = 0.90;
    double noise_correlation = 0.0;
    std::string format;
};

void cmd_synth(Context& ctx, const SynthOptions& opt)
{
    synth::SynthConfig cfg;
    cfg.n = opt.n;
    cfg.pos_fraction = opt.pos_fraction;
    cfg.target_auc_nlp = opt.auc_nlp;
    cfg.target_auc_cv = opt.auc_cv;
    cfg.noise_correlation = opt.noise_correlation;
    cfg.seed = ctx.global.seed;
    const ScoreDataset ds = synth::generate(cfg);

    Manifest manifest("synth");
    manifest.parameters() = {{"n", cfg.n},
                             {"pos_fraction", cfg.pos_fraction},
                             {"target_auc_nlp", cfg.target_auc_nlp},
                             {"target_auc_cv", cfg.target_auc_cv},
                             {"noise_correlation", cfg.noise_correlation}};
    manifest.seeds() = {{"seed", cfg.seed}};

    std::ostringstream buf;
    write_dataset(ds, buf, resolve_format(opt.format, ctx.global.output));
    emit(ctx, manifest, buf.str());
    manifest.write();
    ctx.log.info("wrote " + std::to_string(ds.size()) + " records (" +
                 std::to_string(ds.count_label(1)) + " positive)");
}

// ---------------------------------------------------------------- fuse

struct FuseOptions {
    std::string model;
    std::string train;
    std::string format;
    double threshold = fusion::kDefaultThreshold;
    std::size_t n_trees = 100;
    std::size_t max_depth = 0;
    std::size_t min_samples_leaf = 1;
    std::size_t features_per_split = 1;
    bool bootstrap = true;
    unsigned threads = 1;
};

void cmd_fuse(Context& ctx, const FuseOptions& opt)
{
    Manifest manifest("fuse");
    const ScoreDataset train = load_input(opt.train, opt.format, manifest);
    const auto kind = fusion::model_kind_from_string(opt.model);
    if (!(opt.threshold > 0.0 && opt.threshold < 1.0)) {
        throw CommandError("--threshold must lie in (0,1)");
    }

    manifest.parameters()["model"] = std::string(fusion::to_string(kind));
    manifest.parameters()["threshold"] = opt.threshold;
    fusion::FusionModel model;
    switch (kind) {
    case fusion::ModelKind::weighted_average:
        model = fusion::fit_weighted_average(train);
        break;
    case fusion::ModelKind::linear: {
        const auto fit = fusion::fit_linear_detailed(train);
        if (fit.ridge_applied) {
            ctx.log.warn("ridge fallback applied: Gram matrix condition estimate " +
                         (std::isinf(fit.condition_estimate)
                              ? std::string("inf")
                              : fixed(fit.condition_estimate, 3)) +
                         " exceeds 1e12, added lambda=1e-8 to the diagonal");
        }
        model.params = fit.model;
        break;
    }
    case fusion::ModelKind::random_forest: {
        forest::ForestConfig cfg;
        cfg.n_trees = opt.n_trees;
        if (opt.max_depth > 0) {
            cfg.max_depth = opt.max_depth;
        }
        cfg.min_samples_leaf = opt.min_samples_leaf;
        cfg.features_per_split = opt.features_per_split;
        cfg.bootstrap = opt.bootstrap;
        cfg.seed = ctx.global.seed;
        manifest.parameters()["n_trees"] = cfg.n_trees;
        manifest.parameters()["max_depth"] =
            cfg.max_depth ? ordered_json(*cfg.max_depth) : ordered_json(nullptr);
        manifest.parameters()["min_samples_leaf"] = cfg.min_samples_leaf;
        manifest.parameters()["features_per_split"] = cfg.features_per_split;
        manifest.parameters()["bootstrap"] = cfg.bootstrap;
        manifest.seeds()["seed"] = cfg.seed;
        model = fusion::fit_forest(train, cfg, opt.threads);
        break;
    }
    }
    model.threshold = opt.threshold;

    const std::string manifest_name =
        ctx.global.output.empty() ? std::string() : Manifest::name_for(ctx.global.output);
    emit(ctx, manifest, fusion::serialize_model(model, manifest_name));
    manifest.write();
}

// ---------------------------------------------------------------- eval

struct ModelScores {
    std::string name;
    std::string kind;
    metrics::BinaryMetrics metrics;
    metrics::RocCurve roc;
};

ModelScores score_model(const std::string& name, const std::string& kind,
                        std::span<const int> labels, std::span<const double> scores,
                        std::span<const int> predictions)
{
    ModelScores s;
    s.name = name;
    s.kind = kind;
    s.metrics = metrics::precision_recall_f1(metrics::confusion(labels, predictions));
    s.roc = metrics::roc_curve(labels, scores);
    return s;
}

std::vector<int> threshold_labels(std::span<const double> scores, double threshold)
{
    std::vector<int> out;
    out.reserve(scores.size());
    for (double s : scores) {
        out.push_back(s >= threshold ? 1 : 0);
    }
    return out;
}

ordered_json metrics_json(const ModelScores& s)
{
    const auto& m = s.metrics;
    return ordered_json{{"name", s.name},
                        {"kind", s.kind},
                        {"auc", s.roc.auc},
                        {"accuracy", m.accuracy},
                        {"precision", m.precision},
                        {"recall", m.recall},
                        {"f1", m.f1},
                        {"recall_neg", m.recall_neg},
                        {"macro_recall", m.macro_recall},
                        {"macro_f1", m.macro_f1}};
}

struct EvalOptions {
    std::string model;
    std::string test;
    std::string format;
    std::string roc_out;
};

void cmd_eval(Context& ctx, const EvalOptions& opt)
{
    Manifest manifest("eval");
    const std::string model_bytes = read_file(opt.model);
    const auto model = fusion::parse_model(model_bytes);
    manifest.add_input(opt.model, model_bytes);
    const ScoreDataset test = load_input(opt.test, opt.format, manifest);
    if (!test.has_both_classes()) {
        throw CommandError("test set must contain both classes to compute ROC/AUC");
    }

    const auto labels = test.labels();
    const auto scores = fusion::predict_scores(model, test);
    const auto predictions = fusion::predict_labels(model, test);
    const ModelScores s = score_model(fs::path(opt.model).stem().string(),
                                      std::string(fusion::to_string(model.kind())), labels,
                                      scores, predictions);

    std::ostringstream report;
    if (ctx.global.json) {
        report << metrics_json(s).dump(2) << '\n';
    } else {
        const auto& m = s.metrics;
        report << "model      " << s.name << " (" << s.kind << ")\n"
               << "records    " << test.size() << '\n'
               << "accuracy   " << fixed(m.accuracy, 4) << '\n'
               << "precision  " << fixed(m.precision, 4) << '\n'
               << "recall     " << fixed(m.recall, 4) << '\n'
               << "macro_f1   " << fixed(m.macro_f1, 4) << '\n'
               << "auc        " << fixed(s.roc.auc, 3) << '\n';
    }

    if (!opt.roc_out.empty()) {
        std::ostringstream roc;
        metrics::write_roc_csv(s.roc, roc);
        write_file(opt.roc_out, roc.str());
        manifest.add_output(opt.roc_out, roc.str());
    }
    emit(ctx, manifest, report.str());
    manifest.write();
}

// ---------------------------------------------------------------- compare

struct CompareOptions {
    std::string test;
    std::string format;
    std::vector<std::string> models;
};

void cmd_compare(Context& ctx, const CompareOptions& opt)
{
    if (opt.models.size() < 2) {
        throw CommandError("compare needs at least two model files");
    }
    Manifest manifest("compare");
    const ScoreDataset test = load_input(opt.test, opt.format, manifest);
    if (!test.has_both_classes()) {
        throw CommandError("test set must contain both classes to compute ROC/AUC");
    }
    const auto labels = test.labels();

    std::vector<ModelScores> rows;
    for (const auto& path : opt.models) {
        const std::string bytes = read_file(path);
        fusion::FusionModel model;
        try {
            model = fusion::parse_model(bytes);
        } catch (const fusion::FusionError& e) {
            throw CommandError(path + ": " + e.what());
        }
        manifest.add_input(path, bytes);
        const auto scores = fusion::predict_scores(model, test);
        rows.push_back(score_model(fs::path(path).stem().string(),
                                   std::string(fusion::to_string(model.kind())), labels, scores,
                                   fusion::predict_labels(model, test)));
    }
    std::sort(rows.begin(), rows.end(), [](const ModelScores& a, const ModelScores& b) {
        if (a.roc.auc != b.roc.auc) {
            return a.roc.auc > b.roc.auc;
        }
        return a.name < b.name;
    });

    std::vector<ModelScores> baselines;
    for (bool nlp : {true, false}) {
        const auto scores = nlp ? test.nlp_scores() : test.cv_scores();
        baselines.push_back(score_model(nlp ? "nlp" : "cv", "unimodal", labels, scores,
                                        threshold_labels(scores, fusion::kDefaultThreshold)));
    }

    std::ostringstream table;
    if (ctx.global.json) {
        ordered_json j;
        j["test_records"] = test.size();
        j["models"] = ordered_json::array();
        for (const auto& r : rows) {
            j["models"].push_back(metrics_json(r));
        }
        j["baselines"] = ordered_json::array();
        for (const auto& b : baselines) {
            j["baselines"].push_back(metrics_json(b));
        }
        table << j.dump(2) << '\n';
    } else {
        std::size_t width = 8;
        for (const auto& r : rows) {
            width = std::max(width, r.name.size() + 2);
        }
        const auto line = [&](const ModelScores& r) {
            table << std::left << std::setw(static_cast<int>(width)) << r.name << std::setw(18)
                  << r.kind << std::setw(7) << fixed(r.roc.auc, 3) << "  "
                  << std::setw(8) << fixed(r.metrics.accuracy, 4) << "  " << std::setw(8)
                  << fixed(r.metrics.f1, 4) << "  " << fixed(r.metrics.macro_f1, 4) << '\n';
        };
        table << std::left << std::setw(static_cast<int>(width)) << "model" << std::setw(18)
              << "kind" << std::setw(7) << "auc" << "  " << std::setw(8) << "accuracy" << "  "
              << std::setw(8) << "f1" << "  " << "macro_f1" << '\n';
        for (const auto& r : rows) {
            line(r);
        }
        table << "-- unimodal baselines (score >= 0.5)\n";
        for (const auto& b : baselines) {
            line(b);
        }
    }
    emit(ctx, manifest, table.str());
    manifest.write();
}

// ---------------------------------------------------------------- dropout-sweep

struct SweepOptions {
    std::vector<double> ps{0.0, 0.1, 0.2, 0.5};
    std::size_t epochs = microtrain::kSweepDefaultEpochs;
    std::string report_prefix;
};

void cmd_dropout_sweep(Context& ctx, const SweepOptions& opt)
{
    for (double p : opt.ps) {
        if (!(p >= 0.0 && p < 1.0)) {
            throw CommandError("dropout probability " + fixed(p, 3) + " is outside [0,1)");
        }
    }
    if (opt.epochs == 0) {
        throw CommandError("--epochs must be positive");
    }
    Manifest manifest("dropout-sweep");
    manifest.parameters() = {{"p", opt.ps}, {"epochs", opt.epochs}};
    manifest.seeds() = {{"seed", ctx.global.seed}};

    const auto rows = microtrain::dropout_sweep(opt.ps, opt.epochs, ctx.global.seed);

    std::ostringstream table;
    if (ctx.global.json) {
        ordered_json j = ordered_json::array();
        for (const auto& r : rows) {
            j.push_back({{"p", r.dropout_p},
                         {"trainset_accuracy", r.train_accuracy},
                         {"testset_accuracy", r.test_accuracy}});
        }
        table << j.dump(2) << '\n';
    } else {
        table << "p,trainset_accuracy,testset_accuracy\n";
        for (const auto& r : rows) {
            table << r.dropout_p << ',' << fixed(r.train_accuracy, 4) << ','
                  << fixed(r.test_accuracy, 4) << '\n';
        }
    }

    for (const auto& r : rows) {
        if (opt.report_prefix.empty()) {
            break;
        }
        std::ostringstream csv;
        microtrain::write_report_csv(r.report, csv);
        std::ostringstream name;
        name << opt.report_prefix << "p" << r.dropout_p << ".csv";
        write_file(name.str(), csv.str());
        manifest.add_output(name.str(), csv.str());
    }
    emit(ctx, manifest, table.str());
    manifest.write();
}

// ---------------------------------------------------------------- validate

struct ValidateOptions {
    std::string input;
    std::string format;
};

void cmd_validate(Context& ctx, const ValidateOptions& opt)
{
    Manifest manifest("validate");
    const ScoreDataset ds = load_input(opt.input, opt.format, manifest);
    const auto pos = ds.count_label(1);
    const auto neg = ds.count_label(0);
    std::ostringstream report;
    if (ctx.global.json) {
        report << ordered_json{{"valid", true},
                               {"records", ds.size()},
                               {"positive", pos},
                               {"negative", neg}}
                      .dump(2)
               << '\n';
    } else {
        report << "ok: " << ds.size() << " records (" << pos << " positive, " << neg
               << " negative)\n";
    }
    if (pos == 0 || neg == 0) {
        ctx.log.warn("dataset has a single class; ROC/AUC and model fitting will reject it");
    }
    emit(ctx, manifest, report.str());
    manifest.write();
}

// ---------------------------------------------------------------- config file

std::map<std::string, std::string> read_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw CommandError("cannot open config file " + path.string());
    }
    std::map<std::string, std::string> entries;
    std::string line;
    std::size_t line_no = 0;
    const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) {
            return std::string();
        }
        return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw CommandError(path.string() + ":" + std::to_string(line_no) +
                               ": expected key=value");
        }
        std::string key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        entries[key] = trim(line.substr(eq + 1));
    }
    return entries;
}

std::optional<std::string> find_config_path(const std::vector<std::string>& args)
{
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            return args[i + 1];
        }
        if (args[i].starts_with("--config=")) {
            return args[i].substr(9);
        }
    }
    return std::nullopt;
}

bool flag_given(const std::vector<std::string>& args, const std::string& name)
{
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
        return a == name || a.starts_with(name + "=");
    });
}

// Appends `--key value` for config entries the command line does not set.
std::vector<std::string> apply_config(std::vector<std::string> args, const CLI::App& app,
                                      const Logger& log)
{
    const auto path = find_config_path(args);
    if (!path) {
        return args;
    }
    const CLI::App* sub = nullptr;
    for (const auto* candidate : app.get_subcommands({})) {
        if (std::find(args.begin(), args.end(), candidate->get_name()) != args.end()) {
            sub = candidate;
            break;
        }
    }
    for (const auto& [key, value] : read_config(*path)) {
        const std::string flag = "--" + key;
        if (key == "config" || flag_given(args, flag) ||
            (key == "bootstrap" && flag_given(args, "--no-bootstrap"))) {
            continue;
        }
        const bool known = app.get_option_no_throw(flag) != nullptr ||
                           (sub != nullptr && sub->get_option_no_throw(flag) != nullptr);
        if (!known) {
            log.info("config key '" + key + "' does not apply to this command; ignored");
            continue;
        }
        std::istringstream tokens(value);
        std::vector<std::string> parts{std::istream_iterator<std::string>(tokens), {}};
        if (parts.size() == 1) {
            args.push_back(flag + "=" + parts.front());
        } else {
            args.push_back(flag);
            args.insert(args.end(), parts.begin(), parts.end());
        }
    }
    return args;
}

} // namespace

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    static constexpr char kHex[] = "0123456789abcdef";
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(kHex[digest[i] >> 4]);
        hex.push_back(kHex[digest[i] & 0xF]);
    }
    return hex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Context ctx{out, err, Logger(err, log_level_from_env()), {}};

    CLI::App app{"Late fusion of per-modality classifier scores, with evaluation tooling",
                 std::string(kToolName)};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));
    app.add_option("--seed", ctx.global.seed, "Seed for every random choice")->capture_default_str();
    app.add_flag("--json", ctx.global.json, "Machine-readable output");
    app.add_option("-o,--output", ctx.global.output, "Output file (default: stdout)");
    app.add_option("--config", ctx.global.config, "key=value file; flags take precedence");

    SynthOptions synth_opt;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic score dataset")->fallthrough();
    synth->add_option("--n", synth_opt.n, "Number of records")->required();
    synth->add_option("--pos-fraction", synth_opt.pos_fraction, "Share of positive records")
        ->capture_default_str();
    synth->add_option("--auc-nlp", synth_opt.auc_nlp, "Target AUC of the NLP score")
        ->capture_default_str();
    synth->add_option("--auc-cv", synth_opt.auc_cv, "Target AUC of the CV score")
        ->capture_default_str();
    synth->add_option("--noise-correlation", synth_opt.noise_correlation,
                      "Correlation of the two modalities' noise")
        ->capture_default_str();
    synth->add_option("--format", synth_opt.format, "csv or jsonl (default: from extension)")
        ->check(CLI::IsMember({"csv", "jsonl"}));

    FuseOptions fuse_opt;
    auto* fuse = app.add_subcommand("fuse", "Fit a fusion model on a training file")->fallthrough();
    fuse->add_option("--model", fuse_opt.model, "wa | linreg | rf")
        ->required()
        ->check(CLI::IsMember({"wa", "linreg", "rf"}));
    fuse->add_option("--train", fuse_opt.train, "Training dataset")->required();
    fuse->add_option("--format", fuse_opt.format, "csv or jsonl (default: from extension)")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    fuse->add_option("--threshold", fuse_opt.threshold, "Decision threshold")->capture_default_str();
    fuse->add_option("--n-trees", fuse_opt.n_trees, "Forest size")->capture_default_str();
    fuse->add_option("--max-depth", fuse_opt.max_depth, "Tree depth limit (0 = unlimited)")
        ->capture_default_str();
    fuse->add_option("--min-samples-leaf", fuse_opt.min_samples_leaf)->capture_default_str();
    fuse->add_option("--features-per-split", fuse_opt.features_per_split)
        ->check(CLI::Range(1, 2))
        ->capture_default_str();
    fuse->add_flag("--bootstrap,!--no-bootstrap", fuse_opt.bootstrap,
                   "Fit each tree on a bootstrap resample");
    fuse->add_option("--threads", fuse_opt.threads, "Tree-fitting threads (0 = all cores)")
        ->capture_default_str();

    EvalOptions eval_opt;
    auto* eval = app.add_subcommand("eval", "Evaluate a model on a test file")->fallthrough();
    eval->add_option("--model", eval_opt.model, "Model file")->required();
    eval->add_option("--test", eval_opt.test, "Test dataset")->required();
    eval->add_option("--format", eval_opt.format)->check(CLI::IsMember({"csv", "jsonl"}));
    eval->add_option("--roc-out", eval_opt.roc_out, "Write ROC points as threshold,fpr,tpr CSV");

    CompareOptions compare_opt;
    auto* compare =
        app.add_subcommand("compare", "Rank several models by test AUC")->fallthrough();
    compare->add_option("--test", compare_opt.test, "Test dataset")->required();
    compare->add_option("--format", compare_opt.format)->check(CLI::IsMember({"csv", "jsonl"}));
    compare->add_option("models", compare_opt.models, "Model files")->required();

    SweepOptions sweep_opt;
    auto* sweep = app.add_subcommand("dropout-sweep",
                                     "Train the demo network at several dropout rates")
                      ->fallthrough();
    sweep->add_option("--p", sweep_opt.ps, "Dropout probabilities")->capture_default_str();
    sweep->add_option("--epochs", sweep_opt.epochs)->capture_default_str();
    sweep->add_option("--report-prefix", sweep_opt.report_prefix,
                      "Write per-run epoch,lr,train_loss,train_acc,test_acc CSVs");

    ValidateOptions validate_opt;
    auto* validate_cmd =
        app.add_subcommand("validate", "Check a dataset file")->fallthrough();
    validate_cmd->add_option("input", validate_opt.input, "Dataset file")->required();
    validate_cmd->add_option("--format", validate_opt.format)
        ->check(CLI::IsMember({"csv", "jsonl"}));

    try {
        auto effective = apply_config(args, app, ctx.log);
        std::reverse(effective.begin(), effective.end());
        app.parse(effective);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        ctx.log.error(e.what());
        return 2;
    }

    try {
        if (synth->parsed()) {
            cmd_synth(ctx, synth_opt);
        } else if (fuse->parsed()) {
            cmd_fuse(ctx, fuse_opt);
        } else if (eval->parsed()) {
            cmd_eval(ctx, eval_opt);
        } else if (compare->parsed()) {
            cmd_compare(ctx, compare_opt);
        } else if (sweep->parsed()) {
            cmd_dropout_sweep(ctx, sweep_opt);
        } else if (validate_cmd->parsed()) {
            cmd_validate(ctx, validate_opt);
        }
    } catch (const std::exception& e) {
        ctx.log.error(e.what());
        return 1;
    }
    return 0;
}

} // namespace modfuse::cli
