#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ocusum/graph.hpp"

namespace ocusum {

inline std::string format_vertex_set(const std::vector<int>& vertices) {
  std::string out = "{";
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(vertices[i]);
  }
  return out + "}";
}

/// Clique/separator/q/Q tables of a perfect sequence, one clique per line.
inline void print_sequence(std::ostream& os, const PerfectSequence& seq) {
  os << "cliques: K = " << seq.clique_count << "\n";
  for (int k = 1; k <= seq.clique_count; ++k) {
    os << "  C_" << k << " = " << format_vertex_set(seq.cliques[k]);
    if (k >= 2) {
      os << "   S_" << k << " = " << format_vertex_set(seq.separators[k]) << "   q(" << k
         << ") = " << seq.q[k];
    }
    os << "\n";
  }
  for (int j = 1; j <= seq.clique_count; ++j) {
    os << "  Q_" << j << " = " << format_vertex_set(seq.Q[j]) << "\n";
  }
}

}  // namespace ocusum
