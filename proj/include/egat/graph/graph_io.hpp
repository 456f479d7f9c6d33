#pragma once

#include <filesystem>
#include <iosfwd>

#include "egat/graph/sparse_graph.hpp"

namespace egat::graph {

// Edge-list text format: a header line `nodes=<n> edges=<m> efeat=<F>`
// followed by one `src dst weight [f1 .. fF]` line per edge in CSR order.
// Numbers use shortest round-trip rendering, so reading back is exact.
void write_graph(std::ostream& os, const SparseGraph& g);
void write_graph(const std::filesystem::path& path, const SparseGraph& g);

// Throws DataError with the offending line number on malformed input.
SparseGraph read_graph(std::istream& is);
SparseGraph read_graph(const std::filesystem::path& path);

}  // namespace egat::graph
