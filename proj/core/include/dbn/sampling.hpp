#pragma once

#include <cstdint>

#include "dbn/model.hpp"

namespace dbn {

/// Ancestral sampling: prior slices from the independent marginals, later
/// slices per CPT in lag-0 topological order. Deterministic for a given
/// seed. With include_hidden false, hidden columns are projected out of the
/// returned dataset.
Dataset sample_trajectories(const Dbn& dbn, int num_sequences, int length,
                            std::uint64_t seed, bool include_hidden = false);

} // namespace dbn
