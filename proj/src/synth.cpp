#include "modfuse/synth.hpp"

#include "modfuse/rng.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

namespace modfuse::synth {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_real(const std::string& key, const std::string& value)
{
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty()) {
        throw SynthError("config: " + key + " = '" + value + "' is not a number");
    }
    return out;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value)
{
    std::size_t used = 0;
    unsigned long long out = 0;
    try {
        out = std::stoull(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty() || value.front() == '-') {
        throw SynthError("config: " + key + " = '" + value + "' is not a non-negative integer");
    }
    return out;
}

} // namespace

void SynthConfig::validate() const
{
    if (n == 0) {
        throw SynthError("n must be positive");
    }
    if (!(pos_fraction > 0.0 && pos_fraction < 1.0)) {
        throw SynthError("pos_fraction must lie in (0,1)");
    }
    for (double auc : {target_auc_nlp, target_auc_cv}) {
        if (!(auc > 0.5 && auc < 1.0)) {
            throw SynthError("target AUCs must lie in (0.5,1); an AUC of 1 is unsatisfiable");
        }
    }
    if (!(noise_correlation >= -1.0 && noise_correlation <= 1.0)) {
        throw SynthError("noise_correlation must lie in [-1,1]");
    }
}

double separation_for_auc(double auc)
{
    if (!(auc > 0.0 && auc < 1.0)) {
        throw SynthError("AUC must lie in (0,1)");
    }
    // sqrt(2) Phi^-1(a), with Phi^-1(a) = sqrt(2) erfinv(2a - 1)
    return 2.0 * boost::math::erf_inv(2.0 * auc - 1.0);
}

double binormal_auc(double separation)
{
    // Phi(d / sqrt(2)) = erfc(-d / 2) / 2
    return 0.5 * std::erfc(-separation / 2.0);
}

ScoreDataset generate(const SynthConfig& cfg)
{
    cfg.validate();
    Rng rng(cfg.seed);

    const auto n_pos =
        static_cast<std::size_t>(std::llround(static_cast<double>(cfg.n) * cfg.pos_fraction));
    std::vector<int> labels(cfg.n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), 1);
    rng.shuffle(std::span<int>(labels));

    const double delta_nlp = separation_for_auc(cfg.target_auc_nlp);
    const double delta_cv = separation_for_auc(cfg.target_auc_cv);
    const double rho = cfg.noise_correlation;
    const double rho_c = std::sqrt(1.0 - rho * rho);

    ScoreDataset ds;
    ds.provenance = "synth n=" + std::to_string(cfg.n) + " seed=" + std::to_string(cfg.seed);
    ds.records.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const double z_nlp = rng.normal();
        const double e = rng.normal();
        const double z_cv = rho * z_nlp + rho_c * e;
        const int y = labels[i];
        ScoredRecord r;
        r.id = "s" + std::to_string(i);
        r.label = y;
        r.score_nlp = logistic(y * delta_nlp + z_nlp - delta_nlp / 2.0);
        r.score_cv = logistic(y * delta_cv + z_cv - delta_cv / 2.0);
        ds.records.push_back(std::move(r));
    }
    return ds;
}

SynthConfig parse_config(std::istream& in, SynthConfig base)
{
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw SynthError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "n") {
            base.n = parse_unsigned(key, value);
        } else if (key == "pos_fraction") {
            base.pos_fraction = parse_real(key, value);
        } else if (key == "target_auc_nlp") {
            base.target_auc_nlp = parse_real(key, value);
        } else if (key == "target_auc_cv") {
            base.target_auc_cv = parse_real(key, value);
        } else if (key == "noise_correlation") {
            base.noise_correlation = parse_real(key, value);
        } else if (key == "seed") {
            base.seed = parse_unsigned(key, value);
        } else {
            throw SynthError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                             "'");
        }
    }
    base.validate();
    return base;
}

SynthConfig shipped_fixture_config()
{
    SynthConfig cfg;
    cfg.n = 5500;
    cfg.pos_fraction = 0.6;
    cfg.target_auc_nlp = 0.93;
    cfg.target_auc_cv = 0.90;
    cfg.noise_correlation = 0.0;
    cfg.seed = 20231215;
    return cfg;
}

} // namespace modfuse::synth
