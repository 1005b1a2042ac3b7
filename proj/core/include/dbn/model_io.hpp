#pragma once

#include <string>

#include "dbn/model.hpp"

namespace dbn {

/// Canonical JSON text of a model: keys sorted, arrays in variable-id
/// order, CPTs flat in the normative layout, floats printed with 17
/// significant digits. Saving a loaded canonical file reproduces it byte
/// for byte.
std::string model_to_json(const Dbn& dbn);

/// Parses and validates; throws SchemaError naming the offending path or
/// failed invariant.
Dbn model_from_json(const std::string& text);

/// Atomic file round-trip (write-temp, rename).
void save_model(const std::string& path, const Dbn& dbn);
Dbn load_model(const std::string& path);

} // namespace dbn
