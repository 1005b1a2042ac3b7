#pragma once

#include <string>
#include <vector>

namespace dbn {

/// One evaluated model on one dataset.
struct ReportEntry {
    std::string label;
    double bits = 0.0; // held-out bits per slice
};

struct RunTrace {
    std::string dataset;
    std::vector<ReportEntry> entries;
};

/// Renders the held-out comparison as a text table (rows = model labels in
/// first-appearance order, columns = datasets, bits to 3 decimals) plus a
/// machine-readable JSON twin carrying exactly the rendered values.
struct Report {
    std::string table;
    std::string json;
};
Report emit_report(const std::vector<RunTrace>& traces);

} // namespace dbn
