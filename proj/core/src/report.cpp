#include "dbn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

namespace dbn {

namespace {

std::string format_bits(double bits) {
    if (!std::isfinite(bits)) return bits > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", bits);
    return buf;
}

} // namespace

Report emit_report(const std::vector<RunTrace>& traces) {
    std::vector<std::string> labels;
    for (const auto& trace : traces)
        for (const auto& e : trace.entries)
            if (std::find(labels.begin(), labels.end(), e.label) ==
                labels.end())
                labels.push_back(e.label);

    auto cell = [&](const std::string& label,
                    const RunTrace& trace) -> std::string {
        for (const auto& e : trace.entries)
            if (e.label == label) return format_bits(e.bits);
        return "-";
    };

    std::size_t label_width = 0;
    for (const auto& l : labels) label_width = std::max(label_width, l.size());
    std::vector<std::size_t> widths;
    for (const auto& trace : traces) {
        std::size_t w = trace.dataset.size();
        for (const auto& l : labels) w = std::max(w, cell(l, trace).size());
        widths.push_back(w);
    }

    std::string table;
    table += std::string(label_width, ' ');
    for (std::size_t i = 0; i < traces.size(); ++i) {
        table += "  ";
        const std::string& name = traces[i].dataset;
        table += std::string(widths[i] - name.size(), ' ') + name;
    }
    table += "\n";
    for (const auto& label : labels) {
        table += label + std::string(label_width - label.size(), ' ');
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const std::string c = cell(label, traces[i]);
            table += "  " + std::string(widths[i] - c.size(), ' ') + c;
        }
        table += "\n";
    }

    nlohmann::json j;
    j["datasets"] = nlohmann::json::array();
    for (const auto& trace : traces) j["datasets"].push_back(trace.dataset);
    j["rows"] = nlohmann::json::array();
    for (const auto& label : labels) {
        nlohmann::json row;
        row["label"] = label;
        row["bits_per_slice"] = nlohmann::json::object();
        for (const auto& trace : traces)
            for (const auto& e : trace.entries)
                if (e.label == label) {
                    // Carry the rendered precision so both outputs agree.
                    if (std::isfinite(e.bits))
                        row["bits_per_slice"][trace.dataset] =
                            std::round(e.bits * 1000.0) / 1000.0;
                    else
                        row["bits_per_slice"][trace.dataset] =
                            format_bits(e.bits);
                }
        j["rows"].push_back(std::move(row));
    }

    return {table, j.dump(2) + "\n"};
}

} // namespace dbn
