#include "modfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace modfuse::fusion {

namespace {

using nlohmann::json;

void require_fit_input(const ScoreDataset& train)
{
    if (train.empty()) {
        throw FusionError("training set is empty");
    }
    if (!train.has_both_classes()) {
        throw FusionError("training set must contain both classes");
    }
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

json forest_to_json(const forest::Forest& f)
{
    json cfg;
    cfg["n_trees"] = f.config.n_trees;
    cfg["max_depth"] = f.config.max_depth ? json(*f.config.max_depth) : json(nullptr);
    cfg["min_samples_leaf"] = f.config.min_samples_leaf;
    cfg["features_per_split"] = f.config.features_per_split;
    cfg["bootstrap"] = f.config.bootstrap;
    cfg["seed"] = f.config.seed;

    json trees = json::array();
    for (const auto& tree : f.trees) {
        json nodes = json::array();
        for (const auto& n : tree.nodes) {
            nodes.push_back(json::array({static_cast<int>(n.kind), static_cast<int>(n.feature),
                                         n.threshold, n.counts[0], n.counts[1]}));
        }
        trees.push_back(std::move(nodes));
    }
    return json{{"config", std::move(cfg)}, {"trees", std::move(trees)}};
}

// Rebuilds right-child links from a preorder list; returns one past the subtree.
std::size_t link_subtree(std::vector<forest::TreeNode>& nodes, std::size_t i)
{
    if (i >= nodes.size()) {
        throw FusionError("corrupt model file: truncated tree");
    }
    if (nodes[i].is_leaf()) {
        return i + 1;
    }
    const std::size_t right = link_subtree(nodes, i + 1);
    nodes[i].right = right;
    return link_subtree(nodes, right);
}

forest::Forest forest_from_json(const json& j)
{
    forest::Forest f;
    const auto& cfg = j.at("config");
    f.config.n_trees = cfg.at("n_trees").get<std::size_t>();
    if (!cfg.at("max_depth").is_null()) {
        f.config.max_depth = cfg.at("max_depth").get<std::size_t>();
    }
    f.config.min_samples_leaf = cfg.at("min_samples_leaf").get<std::size_t>();
    f.config.features_per_split = cfg.at("features_per_split").get<std::size_t>();
    f.config.bootstrap = cfg.at("bootstrap").get<bool>();
    f.config.seed = cfg.at("seed").get<std::uint64_t>();

    for (const auto& jt : j.at("trees")) {
        forest::Tree tree;
        for (const auto& jn : jt) {
            if (!jn.is_array() || jn.size() != 5) {
                throw FusionError("corrupt model file: tree node must have 5 fields");
            }
            forest::TreeNode n;
            const int kind = jn[0].get<int>();
            const int feature = jn[1].get<int>();
            if ((kind != 0 && kind != 1) || (feature != 0 && feature != 1)) {
                throw FusionError("corrupt model file: bad node kind or feature");
            }
            n.kind = static_cast<forest::TreeNode::Kind>(kind);
            n.feature = static_cast<forest::Feature>(feature);
            n.threshold = jn[2].get<double>();
            n.counts = {jn[3].get<std::uint64_t>(), jn[4].get<std::uint64_t>()};
            tree.nodes.push_back(n);
        }
        if (link_subtree(tree.nodes, 0) != tree.nodes.size()) {
            throw FusionError("corrupt model file: trailing nodes after tree");
        }
        f.trees.push_back(std::move(tree));
    }
    if (f.trees.size() != f.config.n_trees) {
        throw FusionError("corrupt model file: tree count does not match n_trees");
    }
    f.config.validate();
    return f;
}

} // namespace

std::string_view to_string(ModelKind kind) noexcept
{
    switch (kind) {
    case ModelKind::weighted_average:
        return "weighted_average";
    case ModelKind::linear:
        return "linear";
    case ModelKind::random_forest:
        return "random_forest";
    }
    return "unknown";
}

ModelKind model_kind_from_string(std::string_view name)
{
    if (name == "weighted_average" || name == "wa") {
        return ModelKind::weighted_average;
    }
    if (name == "linear" || name == "linreg") {
        return ModelKind::linear;
    }
    if (name == "random_forest" || name == "rf") {
        return ModelKind::random_forest;
    }
    throw FusionError("unknown model kind '" + std::string(name) + "'");
}

double modality_accuracy(const ScoreDataset& ds, bool nlp, double threshold)
{
    if (ds.empty()) {
        throw FusionError("accuracy of an empty dataset is undefined");
    }
    std::size_t correct = 0;
    for (const auto& r : ds.records) {
        const double s = nlp ? r.score_nlp : r.score_cv;
        correct += static_cast<std::size_t>((s >= threshold ? 1 : 0) == r.label);
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

EnsembleWeights weights_from_accuracies(double acc_nlp, double acc_cv)
{
    const double sum = acc_nlp + acc_cv;
    if (!(sum > 0.0)) {
        throw FusionError("both modality accuracies are zero; weights cannot be normalised");
    }
    EnsembleWeights w;
    w.acc_nlp = acc_nlp;
    w.acc_cv = acc_cv;
    w.w_nlp = acc_nlp / sum;
    w.w_cv = acc_cv / sum;
    return w;
}

FusionModel fit_weighted_average(const ScoreDataset& train)
{
    require_fit_input(train);
    return FusionModel{weights_from_accuracies(modality_accuracy(train, true),
                                               modality_accuracy(train, false)),
                       kDefaultThreshold};
}

LinearFit fit_linear_detailed(const ScoreDataset& train)
{
    if (train.empty()) {
        throw FusionError("training set is empty");
    }
    const auto n = static_cast<Eigen::Index>(train.size());
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = train.records[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        x(i, 1) = r.score_nlp;
        x(i, 2) = r.score_cv;
        y(i) = r.label;
    }

    Eigen::Matrix3d gram = x.transpose() * x;
    const Eigen::Vector3d rhs = x.transpose() * y;

    LinearFit fit;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    fit.condition_estimate = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    double lambda = 0.0;
    if (!(fit.condition_estimate <= kRidgeConditionLimit)) {
        lambda = kRidgeLambda;
        gram.diagonal().array() += lambda;
        fit.ridge_applied = true;
    }

    const Eigen::LDLT<Eigen::Matrix3d> ldlt(gram);
    if (ldlt.info() != Eigen::Success) {
        throw FusionError("normal equations are singular even with the ridge fallback");
    }
    Eigen::Vector3d beta = ldlt.solve(rhs);
    // one round of iterative refinement on the (possibly ridged) system
    const Eigen::Vector3d residual_rhs = x.transpose() * (y - x * beta) - lambda * beta;
    beta += ldlt.solve(residual_rhs);

    if (!beta.allFinite()) {
        throw FusionError("normal equations are singular even with the ridge fallback");
    }
    fit.model = LinearModel{beta(0), beta(1), beta(2)};
    return fit;
}

FusionModel fit_linear(const ScoreDataset& train)
{
    return FusionModel{fit_linear_detailed(train).model, kDefaultThreshold};
}

std::vector<forest::Sample> to_samples(const ScoreDataset& ds)
{
    std::vector<forest::Sample> samples;
    samples.reserve(ds.size());
    for (const auto& r : ds.records) {
        samples.push_back(forest::Sample{{r.score_nlp, r.score_cv}, r.label});
    }
    return samples;
}

FusionModel fit_forest(const ScoreDataset& train, const forest::ForestConfig& cfg,
                       unsigned threads)
{
    require_fit_input(train);
    const auto samples = to_samples(train);
    try {
        return FusionModel{forest::fit_forest(samples, cfg, threads), kDefaultThreshold};
    } catch (const forest::ForestError& e) {
        throw FusionError(e.what());
    }
}

double predict_score(const FusionModel& m, const ScoredRecord& r)
{
    return std::visit(
        overloaded{
            [&](const EnsembleWeights& w) { return w.w_nlp * r.score_nlp + w.w_cv * r.score_cv; },
            [&](const LinearModel& lm) {
                return std::clamp(lm.raw(r.score_nlp, r.score_cv), 0.0, 1.0);
            },
            [&](const forest::Forest& f) { return f.predict_proba({r.score_nlp, r.score_cv}); },
        },
        m.params);
}

std::vector<double> predict_scores(const FusionModel& m, const ScoreDataset& ds)
{
    std::vector<double> out;
    out.reserve(ds.size());
    for (const auto& r : ds.records) {
        out.push_back(predict_score(m, r));
    }
    return out;
}

std::vector<int> predict_labels(const FusionModel& m, const ScoreDataset& ds)
{
    std::vector<int> out;
    out.reserve(ds.size());
    for (const auto& r : ds.records) {
        // linear labels use the unclamped value; clamping fixes any threshold in (0,1)
        const double s = std::holds_alternative<LinearModel>(m.params)
                             ? std::get<LinearModel>(m.params).raw(r.score_nlp, r.score_cv)
                             : predict_score(m, r);
        out.push_back(s >= m.threshold ? 1 : 0);
    }
    return out;
}

std::string serialize_model(const FusionModel& m, std::string_view manifest)
{
    json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = std::string(to_string(m.kind()));
    j["threshold"] = m.threshold;
    if (!manifest.empty()) {
        j["manifest"] = std::string(manifest);
    }
    j["params"] = std::visit(
        overloaded{
            [](const EnsembleWeights& w) {
                return json{{"w_nlp", w.w_nlp},
                            {"w_cv", w.w_cv},
                            {"acc_nlp", w.acc_nlp},
                            {"acc_cv", w.acc_cv}};
            },
            [](const LinearModel& lm) {
                return json{{"intercept", lm.intercept},
                            {"coef_nlp", lm.coef_nlp},
                            {"coef_cv", lm.coef_cv}};
            },
            [](const forest::Forest& f) { return forest_to_json(f); },
        },
        m.params);
    return j.dump() + "\n";
}

FusionModel parse_model(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FusionError(std::string("corrupt model file: ") + e.what());
    }
    try {
        if (!j.is_object() || !j.contains("format_version")) {
            throw FusionError("corrupt model file: missing format_version");
        }
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw FusionError("model format_version " + std::to_string(version) +
                              " is not supported (expected " +
                              std::to_string(kModelFormatVersion) + ")");
        }
        FusionModel m;
        m.threshold = j.at("threshold").get<double>();
        if (!(m.threshold > 0.0 && m.threshold < 1.0)) {
            throw FusionError("corrupt model file: threshold must lie in (0,1)");
        }
        const auto& p = j.at("params");
        switch (model_kind_from_string(j.at("kind").get<std::string>())) {
        case ModelKind::weighted_average: {
            EnsembleWeights w;
            w.w_nlp = p.at("w_nlp").get<double>();
            w.w_cv = p.at("w_cv").get<double>();
            w.acc_nlp = p.at("acc_nlp").get<double>();
            w.acc_cv = p.at("acc_cv").get<double>();
            m.params = w;
            break;
        }
        case ModelKind::linear:
            m.params = LinearModel{p.at("intercept").get<double>(), p.at("coef_nlp").get<double>(),
                                   p.at("coef_cv").get<double>()};
            break;
        case ModelKind::random_forest:
            m.params = forest_from_json(p);
            break;
        }
        return m;
    } catch (const json::exception& e) {
        throw FusionError(std::string("corrupt model file: ") + e.what());
    } catch (const forest::ForestError& e) {
        throw FusionError(std::string("corrupt model file: ") + e.what());
    }
}

void save_model(const FusionModel& m, const std::filesystem::path& path, std::string_view manifest)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FusionError("cannot open " + path.string() + " for writing");
    }
    out << serialize_model(m, manifest);
    if (!out.flush()) {
        throw FusionError("write failed for " + path.string());
    }
}

FusionModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FusionError("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_model(buf.str());
    } catch (const FusionError& e) {
        throw FusionError(path.string() + ": " + e.what());
    }
}

} // namespace modfuse::fusion
