#pragma once

#include <string>

#include "fblab/lattice.hpp"

namespace fblab {

// Writes u to <stem>.gfn (raw little-endian float64 node values, row-major,
// axis 0 slowest) and <stem>.gfn.json (dim, bounds, h, shape, role).
// `stem` may already carry the .gfn suffix.
void write_gfn(const std::string& stem, const GridFunction& u);

// Reads a field written by write_gfn. Round-trips bit-exactly.
GridFunction read_gfn(const std::string& stem);

}  // namespace fblab
