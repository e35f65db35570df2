#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffnea/scalar.hpp"

namespace diffnea {

/// Ordered, uniquely named set of trainable scalars.
///
/// Values live here between training steps; bind() registers them as fresh
/// leaves on the active tape so a loss can be differentiated with respect to
/// them. Order is the insertion order and never changes.
class ParamSet {
 public:
  std::size_t add(std::string name, double value);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws std::out_of_range for unknown names.
  std::size_t index(std::string_view name) const;

  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  double value(std::size_t i) const { return values_.at(i); }
  double value(std::string_view name) const { return values_[index(name)]; }
  void set_value(std::size_t i, double v) { values_.at(i) = v; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> mutable_values() noexcept { return values_; }

  /// Registers every entry as a leaf on the active tape. Entries whose mask
  /// bit is false are bound as constants (zero gradient, no tape node).
  std::span<const DiffScalar> bind(std::span<const bool> learnable = {});

  /// The entries produced by the most recent bind().
  std::span<const DiffScalar> entries() const noexcept { return bound_; }

  bool bound_to_active_tape() const noexcept;

 private:
  friend std::vector<double> gradient(const DiffScalar& loss, const ParamSet& params);

  std::vector<std::string> names_;
  std::vector<double> values_;
  std::map<std::string, std::size_t, std::less<>> index_;

  std::vector<DiffScalar> bound_;
  std::uint64_t bound_generation_ = 0;
  const Tape* bound_tape_ = nullptr;
  std::size_t bound_tape_start_ = 0;
};

/// d(loss)/d(param_i) for every parameter; zero for parameters the loss does
/// not depend on. Throws StructuralError if the loss is a constant or the
/// parameters were not bound on the active tape before the loss was recorded.
std::vector<double> gradient(const DiffScalar& loss, const ParamSet& params);

}  // namespace diffnea
