#include "dbn/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

bool parse_int(const std::string& s, long* out) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, *out);
    return ec == std::errc{} && p == e;
}

bool parse_double(const std::string& s, double* out) {
    if (s.empty()) return false;
    char* end = nullptr;
    *out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

struct RawCsv {
    std::vector<std::string> header;
    // (line number, tokens) per row, grouped into sequences
    std::vector<std::vector<std::pair<int, std::vector<std::string>>>> seqs;
};

RawCsv read_raw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    RawCsv raw;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    std::vector<std::pair<int, std::vector<std::string>>> seq;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty()) {
            if (!seq.empty()) {
                raw.seqs.push_back(std::move(seq));
                seq.clear();
            }
            continue;
        }
        auto cells = split_row(line);
        if (!have_header) {
            raw.header = cells;
            have_header = true;
            continue;
        }
        if (cells.size() != raw.header.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": row has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(raw.header.size()));
        seq.push_back({lineno, std::move(cells)});
    }
    if (!seq.empty()) raw.seqs.push_back(std::move(seq));
    if (!have_header) throw DataError(path + ": missing header row");
    for (const auto& s : raw.seqs)
        if (s.size() < 2)
            throw DataError(path + ":" + std::to_string(s.front().first) +
                            ": sequence shorter than 2 slices");
    if (raw.seqs.empty()) throw DataError(path + ": no data rows");
    return raw;
}

int bin_of(double x, const std::vector<double>& edges) {
    int b = 0;
    for (double e : edges)
        if (e <= x) ++b;
    return b;
}

Dataset apply_dict(const RawCsv& raw, const DataDict& dict,
                   const std::string& path) {
    Dataset data;
    for (const auto& col : dict.columns) {
        data.names.push_back(col.name);
        data.cardinalities.push_back(col.cardinality);
    }
    const int n = static_cast<int>(dict.columns.size());
    for (const auto& rows : raw.seqs) {
        std::vector<std::vector<int>> seq;
        for (const auto& [lineno, cells] : rows) {
            std::vector<int> slice(n);
            for (int c = 0; c < n; ++c) {
                const std::string& tok = cells[c];
                const ColumnDict& col = dict.columns[c];
                if (tok == "?") {
                    slice[c] = kMissing;
                    continue;
                }
                switch (col.kind) {
                case ColumnDict::Kind::Index: {
                    long v;
                    if (!parse_int(tok, &v) || v < 0 || v >= col.cardinality)
                        throw DataError(path + ":" + std::to_string(lineno) +
                                        ": unknown token '" + tok +
                                        "' in column " + col.name);
                    slice[c] = static_cast<int>(v);
                    break;
                }
                case ColumnDict::Kind::Symbol: {
                    auto it = std::lower_bound(col.symbols.begin(),
                                               col.symbols.end(), tok);
                    if (it == col.symbols.end() || *it != tok)
                        throw DataError(path + ":" + std::to_string(lineno) +
                                        ": unknown token '" + tok +
                                        "' in column " + col.name);
                    slice[c] = static_cast<int>(it - col.symbols.begin());
                    break;
                }
                case ColumnDict::Kind::Binned: {
                    double x;
                    if (!parse_double(tok, &x))
                        throw DataError(path + ":" + std::to_string(lineno) +
                                        ": non-numeric token '" + tok +
                                        "' in continuous column " + col.name);
                    slice[c] = bin_of(x, col.edges);
                    break;
                }
                }
            }
            seq.push_back(std::move(slice));
        }
        data.sequences.push_back(std::move(seq));
    }
    data.check();
    return data;
}

} // namespace

std::pair<Dataset, DataDict> ingest_csv(const std::string& path,
                                        const IngestOptions& options) {
    if (!options.continuous.empty() && options.buckets < 2)
        throw DataError("ingest: buckets must be >= 2");
    const RawCsv raw = read_raw(path);
    const int n = static_cast<int>(raw.header.size());

    DataDict dict;
    for (int c = 0; c < n; ++c) {
        ColumnDict col;
        col.name = raw.header[c];
        const bool forced = std::find(options.continuous.begin(),
                                      options.continuous.end(),
                                      col.name) != options.continuous.end();
        bool all_int = true, all_num = true;
        long max_int = 1;
        std::vector<double> numeric;
        std::vector<std::string> symbols;
        bool any_symbol = false, any_numeric = false;
        for (const auto& rows : raw.seqs)
            for (const auto& [lineno, cells] : rows) {
                const std::string& tok = cells[c];
                if (tok == "?") continue;
                long iv;
                double dv;
                if (parse_int(tok, &iv)) {
                    any_numeric = true;
                    max_int = std::max(max_int, iv);
                    if (iv < 0) all_int = false;
                    numeric.push_back(static_cast<double>(iv));
                } else if (parse_double(tok, &dv)) {
                    any_numeric = true;
                    all_int = false;
                    numeric.push_back(dv);
                } else {
                    any_symbol = true;
                    all_int = all_num = false;
                    symbols.push_back(tok);
                }
            }
        if (any_symbol && any_numeric)
            throw DataError("column " + col.name +
                            " mixes numeric and symbolic values");
        if (forced && any_symbol)
            throw DataError("column " + col.name +
                            " declared continuous but has symbolic values");

        if (forced || (any_numeric && !all_int)) {
            if (options.buckets < 2)
                throw DataError("ingest: buckets must be >= 2");
            std::sort(numeric.begin(), numeric.end());
            col.kind = ColumnDict::Kind::Binned;
            col.cardinality = options.buckets;
            const std::size_t m = numeric.size();
            for (int j = 1; j < options.buckets; ++j) {
                const std::size_t at = j * m / options.buckets;
                if (at < m) col.edges.push_back(numeric[at]);
            }
            col.edges.erase(std::unique(col.edges.begin(), col.edges.end()),
                            col.edges.end());
        } else if (any_numeric) {
            col.kind = ColumnDict::Kind::Index;
            col.cardinality = static_cast<int>(std::max(max_int + 1, 2L));
        } else {
            std::sort(symbols.begin(), symbols.end());
            symbols.erase(std::unique(symbols.begin(), symbols.end()),
                          symbols.end());
            col.kind = ColumnDict::Kind::Symbol;
            col.symbols = symbols;
            col.cardinality = std::max<int>(2, static_cast<int>(symbols.size()));
        }
        dict.columns.push_back(std::move(col));
    }
    return {apply_dict(raw, dict, path), dict};
}

Dataset ingest_csv_with(const std::string& path, const DataDict& dict) {
    const RawCsv raw = read_raw(path);
    if (raw.header.size() != dict.columns.size())
        throw DataError(path + ": header does not match the dictionary");
    for (std::size_t c = 0; c < dict.columns.size(); ++c)
        if (raw.header[c] != dict.columns[c].name)
            throw DataError(path + ": column '" + raw.header[c] +
                            "' does not match dictionary column '" +
                            dict.columns[c].name + "'");
    return apply_dict(raw, dict, path);
}

void write_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    for (int c = 0; c < data.num_cols(); ++c)
        out << (c ? "," : "") << data.names[c];
    out << "\n";
    for (std::size_t s = 0; s < data.sequences.size(); ++s) {
        if (s) out << "\n";
        for (const auto& slice : data.sequences[s]) {
            for (int c = 0; c < data.num_cols(); ++c) {
                if (c) out << ",";
                if (slice[c] == kMissing)
                    out << "?";
                else
                    out << slice[c];
            }
            out << "\n";
        }
    }
    if (!out) throw DataError("failed writing '" + path + "'");
}

std::string dict_to_json(const DataDict& dict) {
    nlohmann::json j;
    j["columns"] = nlohmann::json::array();
    for (const auto& col : dict.columns) {
        nlohmann::json c;
        c["name"] = col.name;
        c["cardinality"] = col.cardinality;
        switch (col.kind) {
        case ColumnDict::Kind::Index:
            c["kind"] = "index";
            break;
        case ColumnDict::Kind::Symbol:
            c["kind"] = "symbol";
            c["symbols"] = col.symbols;
            break;
        case ColumnDict::Kind::Binned:
            c["kind"] = "binned";
            c["edges"] = col.edges;
            break;
        }
        j["columns"].push_back(std::move(c));
    }
    return j.dump(2) + "\n";
}

DataDict dict_from_json(const std::string& text) {
    DataDict dict;
    nlohmann::json j = nlohmann::json::parse(text);
    for (const auto& c : j.at("columns")) {
        ColumnDict col;
        col.name = c.at("name").get<std::string>();
        col.cardinality = c.at("cardinality").get<int>();
        const std::string kind = c.at("kind").get<std::string>();
        if (kind == "index") {
            col.kind = ColumnDict::Kind::Index;
        } else if (kind == "symbol") {
            col.kind = ColumnDict::Kind::Symbol;
            col.symbols = c.at("symbols").get<std::vector<std::string>>();
        } else if (kind == "binned") {
            col.kind = ColumnDict::Kind::Binned;
            col.edges = c.at("edges").get<std::vector<double>>();
        } else {
            throw SchemaError("unknown column kind '" + kind + "'");
        }
        dict.columns.push_back(std::move(col));
    }
    return dict;
}

void save_dict(const std::string& path, const DataDict& dict) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << dict_to_json(dict);
}

DataDict load_dict(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return dict_from_json(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

} // namespace dbn
