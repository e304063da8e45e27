#pragma once
// Synthetic two-modality score datasets from a binormal model.
//
// Each modality has a latent value  x = label * delta + z,  z ~ N(0,1), with
// the two modalities' noises correlated by rho. Under this model the AUC of a
// modality is Phi(delta / sqrt(2)), so delta = sqrt(2) * Phi^-1(target_auc).
// Scores are the logistic squash of x - delta/2, which places the class
// midpoint at 0.5.

#include "modfuse/dataset.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace modfuse::synth {

class SynthError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SynthConfig {
    std::size_t n = 5500;
    double pos_fraction = 0.6; // positives : negatives = 3 : 2
    double target_auc_nlp = 0.93;
    double target_auc_cv = 0.90;
    double noise_correlation = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Separation of class means (in noise standard deviations) giving `auc`.
double separation_for_auc(double auc);

// Inverse of separation_for_auc.
double binormal_auc(double separation);

// Exactly round(n * pos_fraction) positives, placed by a seeded shuffle.
ScoreDataset generate(const SynthConfig& cfg);

// Plain-text `key=value` lines (# comments allowed); unknown keys are errors.
SynthConfig parse_config(std::istream& in, SynthConfig base = {});

// The calibrated fixture used for the fusion comparison: n=5500,
// pos_fraction=0.6, unimodal targets 0.93 / 0.90, independent noise.
SynthConfig shipped_fixture_config();

} // namespace modfuse::synth
