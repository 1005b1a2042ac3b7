#pragma once

#include <string>
#include <vector>

#include "dbn/model.hpp"

namespace dbn {

/// How each column maps raw tokens to value indices. Persisted next to
/// learned models so test data goes through the same mapping.
struct ColumnDict {
    enum class Kind { Index, Symbol, Binned };
    std::string name;
    Kind kind = Kind::Index;
    int cardinality = 2;
    std::vector<std::string> symbols; // Symbol: sorted token table
    std::vector<double> edges;        // Binned: ascending bin edges
};

struct DataDict {
    std::vector<ColumnDict> columns;
};

struct IngestOptions {
    int buckets = 7;                      // bins for continuous columns
    std::vector<std::string> continuous;  // columns forced to be binned
};

/// Parses a CSV: header row of variable names, one row per slice, a blank
/// line between sequences, `?` for a missing cell. Integer columns map
/// straight to value indices; all-numeric columns (or ones declared
/// continuous) are discretized by equal-frequency binning with edges from
/// this data; other columns become sorted symbol tables. Throws DataError
/// with a line number on malformed input.
std::pair<Dataset, DataDict> ingest_csv(const std::string& path,
                                        const IngestOptions& options);

/// Re-ingests with a previously computed dictionary (test data must use
/// the training edges and symbol tables). Unknown symbols are errors.
Dataset ingest_csv_with(const std::string& path, const DataDict& dict);

/// Writes a dataset back out in the same CSV format (value indices).
void write_csv(const std::string& path, const Dataset& data);

std::string dict_to_json(const DataDict& dict);
DataDict dict_from_json(const std::string& text);
void save_dict(const std::string& path, const DataDict& dict);
DataDict load_dict(const std::string& path);

} // namespace dbn
