#include "dbn/model_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dbn/errors.hpp"

namespace dbn {

namespace {

// 17 significant digits round-trip any double exactly and make the
// canonical form reproducible.
void append_double(std::string& out, double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out += buf;
}

void append_array(std::string& out, const std::vector<double>& values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        append_double(out, values[i]);
    }
    out += ']';
}

std::string escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    out += '"';
    return out;
}

} // namespace

std::string model_to_json(const Dbn& dbn) {
    std::string out = "{";
    out += "\"cpts\":[";
    for (int c = 0; c < dbn.num_vars(); ++c) {
        if (c) out += ',';
        append_array(out, dbn.cpts[c].table);
    }
    out += "],\"max_indegree\":";
    out += std::to_string(dbn.structure.max_indegree);
    out += ",\"prior\":[";
    for (std::size_t s = 0; s < dbn.prior.size(); ++s) {
        if (s) out += ',';
        out += '[';
        for (int v = 0; v < dbn.num_vars(); ++v) {
            if (v) out += ',';
            append_array(out, dbn.prior[s][v]);
        }
        out += ']';
    }
    out += "],\"structure\":[";
    for (int c = 0; c < dbn.num_vars(); ++c) {
        if (c) out += ',';
        out += '[';
        const auto& ps = dbn.structure.parents[c];
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (i) out += ',';
            out += "{\"lag\":" + std::to_string(ps[i].lag) +
                   ",\"variable\":" + std::to_string(ps[i].variable) + "}";
        }
        out += ']';
    }
    out += "],\"variables\":[";
    for (int v = 0; v < dbn.num_vars(); ++v) {
        if (v) out += ',';
        const Variable& var = dbn.variables[v];
        out += "{\"cardinality\":" + std::to_string(var.cardinality) +
               ",\"kind\":" +
               (var.kind == VarKind::Hidden ? std::string("\"hidden\"")
                                            : std::string("\"observable\"")) +
               ",\"name\":" + escape(var.name) + "}";
    }
    out += "],\"window\":" + std::to_string(dbn.window) + "}\n";
    return out;
}

Dbn model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("model file is not valid JSON: ") +
                          e.what());
    }
    Dbn dbn;
    try {
        const auto& vars = j.at("variables");
        for (std::size_t i = 0; i < vars.size(); ++i) {
            Variable v;
            v.id = static_cast<int>(i);
            v.name = vars[i].at("name").get<std::string>();
            v.cardinality = vars[i].at("cardinality").get<int>();
            const std::string kind = vars[i].at("kind").get<std::string>();
            if (kind == "hidden")
                v.kind = VarKind::Hidden;
            else if (kind == "observable")
                v.kind = VarKind::Observable;
            else
                throw SchemaError("variables[" + std::to_string(i) +
                                  "].kind: unknown kind '" + kind + "'");
            dbn.variables.push_back(std::move(v));
        }
        dbn.window = j.at("window").get<int>();
        dbn.structure.max_indegree = j.at("max_indegree").get<int>();

        const auto& structure = j.at("structure");
        if (structure.size() != dbn.variables.size())
            throw SchemaError("structure: expected one parent list per "
                              "variable");
        for (std::size_t c = 0; c < structure.size(); ++c) {
            std::vector<ParentRef> ps;
            for (const auto& p : structure[c])
                ps.push_back({p.at("variable").get<int>(),
                              p.at("lag").get<int>()});
            dbn.structure.parents.push_back(std::move(ps));
        }

        const auto& prior = j.at("prior");
        for (const auto& slice : prior) {
            if (slice.size() != dbn.variables.size())
                throw SchemaError("prior: wrong variable count in a slice");
            std::vector<std::vector<double>> marginals;
            for (const auto& m : slice)
                marginals.push_back(m.get<std::vector<double>>());
            dbn.prior.push_back(std::move(marginals));
        }

        const auto& cpts = j.at("cpts");
        if (cpts.size() != dbn.variables.size())
            throw SchemaError("cpts: expected one table per variable");
        for (std::size_t c = 0; c < cpts.size(); ++c) {
            Cpt cpt;
            cpt.child = static_cast<int>(c);
            cpt.child_card = dbn.variables[c].cardinality;
            cpt.parents = dbn.structure.parents[c];
            for (const auto& p : cpt.parents) {
                if (p.variable < 0 ||
                    p.variable >= static_cast<int>(dbn.variables.size()))
                    throw SchemaError("structure[" + std::to_string(c) +
                                      "]: parent variable out of range");
                cpt.parent_cards.push_back(
                    dbn.variables[p.variable].cardinality);
            }
            cpt.table = cpts[c].get<std::vector<double>>();
            if (cpt.table.size() != cpt.expected_size())
                throw SchemaError(
                    "cpts[" + std::to_string(c) + "] (" +
                    dbn.variables[c].name + "): table length " +
                    std::to_string(cpt.table.size()) + ", expected " +
                    std::to_string(cpt.expected_size()));
            dbn.cpts.push_back(std::move(cpt));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("model schema violation: ") + e.what());
    }

    const auto issues = validate_dbn(dbn);
    if (!issues.empty()) {
        std::string msg = "model violates invariants:";
        for (const auto& issue : issues) msg += "\n  " + issue;
        throw SchemaError(msg);
    }
    return dbn;
}

void save_model(const std::string& path, const Dbn& dbn) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out << model_to_json(dbn);
        if (!out) throw DataError("failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

Dbn load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

} // namespace dbn
