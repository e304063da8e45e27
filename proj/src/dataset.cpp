#include "modfuse/dataset.hpp"

#include "modfuse/rng.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace modfuse {

namespace {

constexpr std::array<const char*, 4> kColumns = {"id", "label", "score_nlp", "score_cv"};

std::string row_tag(std::size_t row) { return "row " + std::to_string(row); }

std::string format_double(double value)
{
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    return s;
}

// Splits one CSV record; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t row)
{
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty() && !was_quoted) {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else {
            field.push_back(c);
        }
    }
    if (quoted) {
        throw DatasetError("malformed " + row_tag(row) + ": unterminated quoted field");
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string quote_csv(const std::string& value)
{
    if (value.find_first_of(",\"\r\n") == std::string::npos &&
        (value.empty() || (value.front() != ' ' && value.back() != ' '))) {
        return value;
    }
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

double parse_score(std::string_view text, const char* field, std::size_t row)
{
    text = trim(text);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw DatasetError("malformed " + row_tag(row) + ": field " + field + " = '" +
                           std::string(text) + "' is not a number");
    }
    return value;
}

int parse_label(std::string_view text, std::size_t row)
{
    text = trim(text);
    long long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw DatasetError("malformed " + row_tag(row) + ": field label = '" + std::string(text) +
                           "' is not an integer");
    }
    if (value != 0 && value != 1) {
        throw DatasetError("label outside {0,1} at " + row_tag(row));
    }
    return static_cast<int>(value);
}

void check_record(const ScoredRecord& r, std::size_t row)
{
    if (r.id.empty()) {
        throw DatasetError("empty id at " + row_tag(row));
    }
    if (r.label != 0 && r.label != 1) {
        throw DatasetError("label outside {0,1} at " + row_tag(row));
    }
    const auto check_score = [&](double s, const char* field) {
        if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
            throw DatasetError(std::string(field) + " outside [0,1] at " + row_tag(row));
        }
    };
    check_score(r.score_nlp, "score_nlp");
    check_score(r.score_cv, "score_cv");
}

void check_unique_ids(const std::vector<ScoredRecord>& records)
{
    std::unordered_map<std::string_view, std::size_t> seen;
    seen.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = seen.emplace(records[i].id, i + 1);
        if (!inserted) {
            throw DatasetError("duplicate id '" + records[i].id + "' at " + row_tag(i + 1) +
                               " (first seen at " + row_tag(it->second) + ")");
        }
    }
}

bool is_blank(const std::string& line)
{
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

ScoreDataset read_csv(std::istream& in)
{
    std::string line;
    bool have_header = false;
    std::array<std::size_t, 4> column_of{}; // kColumns index -> position in row
    ScoreDataset ds;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!have_header) {
            if (!line.empty() && line.starts_with("\xEF\xBB\xBF")) {
                line.erase(0, 3);
            }
            if (is_blank(line)) {
                continue;
            }
            auto header = split_csv_line(line, 0);
            std::vector<std::string> names;
            for (auto& h : header) {
                names.emplace_back(trim(h));
            }
            for (std::size_t c = 0; c < kColumns.size(); ++c) {
                auto it = std::find(names.begin(), names.end(), kColumns[c]);
                if (it == names.end() ||
                    std::count(names.begin(), names.end(), kColumns[c]) != 1) {
                    throw DatasetError("header must be exactly id,label,score_nlp,score_cv; got '" +
                                       line + "'");
                }
                column_of[c] = static_cast<std::size_t>(it - names.begin());
            }
            if (names.size() != kColumns.size()) {
                throw DatasetError("header must be exactly id,label,score_nlp,score_cv; got '" +
                                   line + "'");
            }
            have_header = true;
            continue;
        }
        if (is_blank(line)) {
            continue;
        }
        ++row;
        auto fields = split_csv_line(line, row);
        if (fields.size() != kColumns.size()) {
            throw DatasetError("malformed " + row_tag(row) + ": expected 4 fields, got " +
                               std::to_string(fields.size()));
        }
        ScoredRecord r;
        r.id = fields[column_of[0]];
        r.label = parse_label(fields[column_of[1]], row);
        r.score_nlp = parse_score(fields[column_of[2]], "score_nlp", row);
        r.score_cv = parse_score(fields[column_of[3]], "score_cv", row);
        check_record(r, row);
        ds.records.push_back(std::move(r));
    }
    if (!have_header) {
        throw DatasetError("empty file");
    }
    return ds;
}

ScoreDataset read_jsonl(std::istream& in)
{
    using nlohmann::json;
    ScoreDataset ds;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (is_blank(line)) {
            continue;
        }
        ++row;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DatasetError("malformed " + row_tag(row) + ": " + e.what());
        }
        if (!obj.is_object() || obj.size() != kColumns.size()) {
            throw DatasetError("malformed " + row_tag(row) +
                               ": expected an object with keys id, label, score_nlp, score_cv");
        }
        for (const char* key : kColumns) {
            if (!obj.contains(key)) {
                throw DatasetError("malformed " + row_tag(row) + ": missing field " + key);
            }
        }
        ScoredRecord r;
        if (!obj["id"].is_string()) {
            throw DatasetError("malformed " + row_tag(row) + ": field id must be a string");
        }
        r.id = obj["id"].get<std::string>();
        const auto& label = obj["label"];
        if (!label.is_number_integer()) {
            throw DatasetError("malformed " + row_tag(row) + ": field label must be an integer");
        }
        if (label.get<long long>() != 0 && label.get<long long>() != 1) {
            throw DatasetError("label outside {0,1} at " + row_tag(row));
        }
        r.label = label.get<int>();
        for (const char* key : {"score_nlp", "score_cv"}) {
            if (!obj[key].is_number()) {
                throw DatasetError("malformed " + row_tag(row) + ": field " + key +
                                   " is not a number");
            }
        }
        r.score_nlp = obj["score_nlp"].get<double>();
        r.score_cv = obj["score_cv"].get<double>();
        check_record(r, row);
        ds.records.push_back(std::move(r));
    }
    if (row == 0) {
        throw DatasetError("empty file");
    }
    return ds;
}

} // namespace

std::size_t ScoreDataset::count_label(int label) const noexcept
{
    return static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(), [label](const ScoredRecord& r) { return r.label == label; }));
}

std::vector<int> ScoreDataset::labels() const
{
    std::vector<int> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(r.label);
    }
    return out;
}

std::vector<double> ScoreDataset::nlp_scores() const
{
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(r.score_nlp);
    }
    return out;
}

std::vector<double> ScoreDataset::cv_scores() const
{
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(r.score_cv);
    }
    return out;
}

DataFormat format_from_path(const std::filesystem::path& path)
{
    return path.extension() == ".jsonl" ? DataFormat::jsonl : DataFormat::csv;
}

void validate(const ScoreDataset& ds)
{
    if (ds.empty()) {
        throw DatasetError("dataset has no records");
    }
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        check_record(ds.records[i], i + 1);
    }
    check_unique_ids(ds.records);
}

ScoreDataset read_dataset(std::istream& in, DataFormat format)
{
    ScoreDataset ds = format == DataFormat::csv ? read_csv(in) : read_jsonl(in);
    if (ds.empty()) {
        throw DatasetError("file contains no records");
    }
    check_unique_ids(ds.records);
    return ds;
}

void write_dataset(const ScoreDataset& ds, std::ostream& out, DataFormat format)
{
    validate(ds);
    if (format == DataFormat::csv) {
        out << "id,label,score_nlp,score_cv\n";
        for (const auto& r : ds.records) {
            out << quote_csv(r.id) << ',' << r.label << ',' << format_double(r.score_nlp) << ','
                << format_double(r.score_cv) << '\n';
        }
    } else {
        for (const auto& r : ds.records) {
            nlohmann::ordered_json obj;
            obj["id"] = r.id;
            obj["label"] = r.label;
            obj["score_nlp"] = r.score_nlp;
            obj["score_cv"] = r.score_cv;
            out << obj.dump() << '\n';
        }
    }
    if (!out) {
        throw DatasetError("write failed");
    }
}

ScoreDataset load_dataset(const std::filesystem::path& path, DataFormat format)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DatasetError("cannot open " + path.string());
    }
    try {
        ScoreDataset ds = read_dataset(in, format);
        ds.provenance = path.string();
        return ds;
    } catch (const DatasetError& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
}

ScoreDataset load_dataset(const std::filesystem::path& path)
{
    return load_dataset(path, format_from_path(path));
}

void save_dataset(const ScoreDataset& ds, const std::filesystem::path& path, DataFormat format)
{
    validate(ds);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DatasetError("cannot open " + path.string() + " for writing");
    }
    write_dataset(ds, out, format);
    out.flush();
    if (!out) {
        throw DatasetError("write failed for " + path.string());
    }
}

void save_dataset(const ScoreDataset& ds, const std::filesystem::path& path)
{
    save_dataset(ds, path, format_from_path(path));
}

std::pair<ScoreDataset, ScoreDataset> split(const ScoreDataset& ds, const SplitSpec& spec)
{
    if (ds.empty()) {
        throw DatasetError("cannot split an empty dataset");
    }
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw DatasetError("train_fraction must lie in (0,1)");
    }
    if (spec.stratified && !ds.has_both_classes()) {
        throw DatasetError("stratified split needs both classes present");
    }

    Rng rng(spec.seed);
    std::vector<char> in_train(ds.size(), 0);
    const auto take = [&](std::vector<std::size_t>& pool) {
        rng.shuffle(std::span<std::size_t>(pool));
        const auto n_train = static_cast<std::size_t>(
            std::llround(spec.train_fraction * static_cast<double>(pool.size())));
        for (std::size_t k = 0; k < n_train; ++k) {
            in_train[pool[k]] = 1;
        }
    };

    if (spec.stratified) {
        for (int label : {0, 1}) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                if (ds.records[i].label == label) {
                    pool.push_back(i);
                }
            }
            take(pool);
        }
    } else {
        std::vector<std::size_t> pool(ds.size());
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        take(pool);
    }

    ScoreDataset train;
    ScoreDataset test;
    train.provenance = ds.provenance + " [train]";
    test.provenance = ds.provenance + " [test]";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        (in_train[i] ? train : test).records.push_back(ds.records[i]);
    }
    if (train.empty() || test.empty()) {
        throw DatasetError("train_fraction " + format_double(spec.train_fraction) +
                           " leaves one side of the split empty");
    }
    return {std::move(train), std::move(test)};
}

} // namespace modfuse
