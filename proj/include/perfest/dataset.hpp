#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "perfest/errors.hpp"
#include "perfest/matrix.hpp"

namespace perfest {

enum class Role { reference, production };

inline const char* to_string(Role r) {
    return r == Role::reference ? "reference" : "production";
}

// Column layout of a dataset file. Label column is optional and may only be
// omitted for production data.
struct DatasetSchema {
    std::vector<std::string> feature_columns;
    std::string score_column = "score";
    std::string prediction_column = "prediction";
    std::optional<std::string> label_column = "label";

    void validate() const {
        std::set<std::string> seen;
        for (const auto& c : feature_columns) {
            if (!seen.insert(c).second) throw SchemaError("duplicate column name: " + c);
        }
        for (const std::string* c : {&score_column, &prediction_column}) {
            if (c->empty()) throw SchemaError("schema column name must not be empty");
            if (!seen.insert(*c).second) throw SchemaError("duplicate column name: " + *c);
        }
        if (label_column && !seen.insert(*label_column).second)
            throw SchemaError("duplicate column name: " + *label_column);
    }
};

// One period of monitored-model traffic: inputs, raw scores, binary predictions
// and (when known) labels. Immutable after load; safe for concurrent reads.
struct ScoredDataset {
    Matrix features;
    std::vector<double> scores;
    std::vector<int> predictions;
    std::optional<std::vector<int>> labels;
    Role role = Role::reference;

    std::size_t n_rows() const { return scores.size(); }
    bool has_labels() const { return labels.has_value(); }

    std::span<const int> label_span() const {
        if (!labels) throw ValidationError("dataset has no labels");
        return *labels;
    }

    void validate() const {
        const std::size_t n = scores.size();
        if (n == 0) throw ValidationError("dataset is empty");
        if (features.rows() != n || predictions.size() != n || (labels && labels->size() != n))
            throw ValidationError("dataset column lengths differ");
        if (!features.all_finite()) throw ValidationError("non-finite feature value");
        for (std::size_t i = 0; i < n; ++i) {
            if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
                throw ValidationError("score outside [0,1] at row " + std::to_string(i));
            if (predictions[i] != 0 && predictions[i] != 1)
                throw ValidationError("non-binary prediction at row " + std::to_string(i));
            if (labels && (*labels)[i] != 0 && (*labels)[i] != 1)
                throw ValidationError("non-binary label at row " + std::to_string(i));
        }
    }
};

// Contiguous window [start, start + size) of a production dataset.
struct Chunk {
    std::size_t start = 0;
    std::size_t size = 0;
};

// Read-only view of one chunk. Cheap to copy, never outlives the dataset.
class ChunkView {
  public:
    ChunkView(const ScoredDataset& data, Chunk chunk) : data_(&data), chunk_(chunk) {
        if (chunk.size == 0 || chunk.start + chunk.size > data.n_rows())
            throw ValidationError("chunk range out of bounds");
    }

    // Whole dataset as a single chunk.
    explicit ChunkView(const ScoredDataset& data)
        : ChunkView(data, Chunk{0, data.n_rows()}) {}

    std::size_t size() const { return chunk_.size; }
    std::size_t start() const { return chunk_.start; }

    MatrixView features() const { return data_->features.rows_view(chunk_.start, chunk_.size); }
    std::span<const double> scores() const {
        return {data_->scores.data() + chunk_.start, chunk_.size};
    }
    std::span<const int> predictions() const {
        return {data_->predictions.data() + chunk_.start, chunk_.size};
    }
    bool has_labels() const { return data_->has_labels(); }
    std::span<const int> labels() const {
        return data_->label_span().subspan(chunk_.start, chunk_.size);
    }

  private:
    const ScoredDataset* data_;
    Chunk chunk_;
};

// Fixed-size windows over a production stream, original order preserved.
// Chunk k starts at k*step; a trailing window that would not fill completely
// is discarded. Overlap is allowed when step < chunk_size.
inline std::vector<Chunk> split_chunks(const ScoredDataset& data, std::size_t chunk_size,
                                       std::size_t step) {
    if (chunk_size < 1 || step < 1) throw ValidationError("chunk_size and step must be >= 1");
    std::vector<Chunk> chunks;
    for (std::size_t start = 0; start + chunk_size <= data.n_rows(); start += step)
        chunks.push_back(Chunk{start, chunk_size});
    return chunks;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double(const std::string& field, std::size_t row, const std::string& col) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ValidationError("cannot parse value '" + field + "' in column " + col + " at row " +
                              std::to_string(row));
    return value;
}

inline int parse_binary(const std::string& field, std::size_t row, const std::string& col) {
    const double v = parse_double(field, row, col);
    if (v == 0.0) return 0;
    if (v == 1.0) return 1;
    throw ValidationError("non-binary value '" + field + "' in column " + col + " at row " +
                          std::to_string(row));
}

// Shortest decimal string that round-trips the exact double.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

// Loads and validates a CSV score dump. Header row required; extra columns are
// ignored; row order is preserved.
inline ScoredDataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema,
                                  Role role) {
    schema.validate();
    if (!schema.label_column && role == Role::reference)
        throw SchemaError("reference data requires a label column");

    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty file: " + path.string());
    const std::vector<std::string> header = detail::split_csv_line(line);

    auto column_index = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw SchemaError("missing column '" + name + "' in " + path.string());
        return static_cast<std::size_t>(it - header.begin());
    };

    std::vector<std::size_t> feature_idx;
    feature_idx.reserve(schema.feature_columns.size());
    for (const auto& c : schema.feature_columns) feature_idx.push_back(column_index(c));
    const std::size_t score_idx = column_index(schema.score_column);
    const std::size_t pred_idx = column_index(schema.prediction_column);
    std::optional<std::size_t> label_idx;
    if (schema.label_column) label_idx = column_index(*schema.label_column);

    std::vector<double> feature_values;
    std::vector<double> scores;
    std::vector<int> predictions;
    std::vector<int> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
        const std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw ValidationError("row " + std::to_string(row) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(header.size()));
        for (std::size_t j = 0; j < feature_idx.size(); ++j) {
            const double v =
                detail::parse_double(fields[feature_idx[j]], row, schema.feature_columns[j]);
            if (!std::isfinite(v))
                throw ValidationError("non-finite feature at row " + std::to_string(row));
            feature_values.push_back(v);
        }
        const double s = detail::parse_double(fields[score_idx], row, schema.score_column);
        if (!(s >= 0.0 && s <= 1.0))
            throw ValidationError("score " + fields[score_idx] + " outside [0,1] at row " +
                                  std::to_string(row));
        scores.push_back(s);
        predictions.push_back(detail::parse_binary(fields[pred_idx], row, schema.prediction_column));
        if (label_idx)
            labels.push_back(detail::parse_binary(fields[*label_idx], row, *schema.label_column));
        ++row;
    }
    if (row == 0) throw ValidationError("no data rows in " + path.string());

    ScoredDataset ds;
    const std::size_t n_feat = schema.feature_columns.size();
    ds.features = Matrix(row, n_feat);
    for (std::size_t i = 0; i < row; ++i)
        for (std::size_t j = 0; j < n_feat; ++j) ds.features(i, j) = feature_values[i * n_feat + j];
    ds.scores = std::move(scores);
    ds.predictions = std::move(predictions);
    if (label_idx) ds.labels = std::move(labels);
    ds.role = role;
    ds.validate();
    return ds;
}

// Writes a dataset in the load_dataset format. Values round-trip exactly.
inline void save_dataset(const std::filesystem::path& path, const ScoredDataset& data,
                         const DatasetSchema& schema) {
    schema.validate();
    if (schema.feature_columns.size() != data.features.cols())
        throw SchemaError("schema feature count does not match dataset");
    const bool write_labels = schema.label_column && data.has_labels();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path.string());

    std::string header;
    for (const auto& c : schema.feature_columns) header += c + ",";
    header += schema.score_column + "," + schema.prediction_column;
    if (write_labels) header += "," + *schema.label_column;
    out << header << "\n";

    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        std::string line;
        for (std::size_t j = 0; j < data.features.cols(); ++j)
            line += detail::format_double(data.features(i, j)) + ",";
        line += detail::format_double(data.scores[i]) + ",";
        line += std::to_string(data.predictions[i]);
        if (write_labels) line += "," + std::to_string((*data.labels)[i]);
        out << line << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace perfest
