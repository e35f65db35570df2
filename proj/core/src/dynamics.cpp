#include "diffnea/dynamics.hpp"

namespace diffnea {

template AbaResult<double> aba_forward<double>(const RealizedTree<double>&, std::span<const double>,
                                               std::span<const double>, std::span<const double>,
                                               AbaWorkspace<double>*);
template AbaResult<DiffScalar> aba_forward<DiffScalar>(const RealizedTree<DiffScalar>&, std::span<const DiffScalar>,
                                                       std::span<const DiffScalar>, std::span<const DiffScalar>,
                                                       AbaWorkspace<DiffScalar>*);
template RneaResult<double> rnea_inverse<double>(const RealizedTree<double>&, std::span<const double>,
                                                 std::span<const double>, std::span<const double>);
template RneaResult<DiffScalar> rnea_inverse<DiffScalar>(const RealizedTree<DiffScalar>&,
                                                         std::span<const DiffScalar>, std::span<const DiffScalar>,
                                                         std::span<const DiffScalar>);
template Energy<double> total_energy<double>(const RealizedTree<double>&, std::span<const double>,
                                             std::span<const double>);
template Energy<DiffScalar> total_energy<DiffScalar>(const RealizedTree<DiffScalar>&, std::span<const DiffScalar>,
                                                     std::span<const DiffScalar>);

}  // namespace diffnea
