#include "diffnea/scalar.hpp"

namespace diffnea {

void Tape::propagate(std::span<double> adjoints, std::size_t end, std::size_t begin) const {
  for (std::size_t i = end; i-- > begin;) {
    const double adj = adjoints[i];
    if (adj == 0.0) continue;
    const Node& node = nodes_[i];
    if (node.lhs >= 0) adjoints[static_cast<std::size_t>(node.lhs)] += adj * node.dlhs;
    if (node.rhs >= 0) adjoints[static_cast<std::size_t>(node.rhs)] += adj * node.drhs;
  }
}

}  // namespace diffnea
