#pragma once
// Score datasets: one record per sample holding the ground-truth label and
// the two per-modality classifier scores that fusion consumes.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace modfuse {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScoredRecord {
    std::string id;
    int label = 0; // 1 = positive class
    double score_nlp = 0.0;
    double score_cv = 0.0;

    friend bool operator==(const ScoredRecord&, const ScoredRecord&) = default;
};

struct ScoreDataset {
    std::vector<ScoredRecord> records;
    std::string provenance;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
    std::size_t count_label(int label) const noexcept;
    bool has_both_classes() const noexcept { return count_label(0) > 0 && count_label(1) > 0; }

    std::vector<int> labels() const;
    std::vector<double> nlp_scores() const;
    std::vector<double> cv_scores() const;
};

enum class DataFormat { csv, jsonl };

// Picks jsonl for a ".jsonl" extension, csv otherwise.
DataFormat format_from_path(const std::filesystem::path& path);

// Checks every record invariant; throws DatasetError naming the first offender.
void validate(const ScoreDataset& ds);

ScoreDataset read_dataset(std::istream& in, DataFormat format);
void write_dataset(const ScoreDataset& ds, std::ostream& out, DataFormat format);

ScoreDataset load_dataset(const std::filesystem::path& path, DataFormat format);
ScoreDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const ScoreDataset& ds, const std::filesystem::path& path, DataFormat format);
void save_dataset(const ScoreDataset& ds, const std::filesystem::path& path);

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool stratified = true;
};

// Seeded partition into (train, test). Membership comes from a Fisher-Yates
// shuffle (per class when stratified); each side keeps the input order.
std::pair<ScoreDataset, ScoreDataset> split(const ScoreDataset& ds, const SplitSpec& spec);

} // namespace modfuse
