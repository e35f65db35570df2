#include "diffnea/param_set.hpp"

#include <stdexcept>

namespace diffnea {

std::size_t ParamSet::add(std::string name, double value) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  const std::size_t i = values_.size();
  index_.emplace(name, i);
  names_.push_back(std::move(name));
  values_.push_back(value);
  return i;
}

std::optional<std::size_t> ParamSet::find(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParamSet::index(std::string_view name) const {
  const auto i = find(name);
  if (!i) throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
  return *i;
}

std::span<const DiffScalar> ParamSet::bind(std::span<const bool> learnable) {
  if (!learnable.empty() && learnable.size() != values_.size()) {
    throw std::invalid_argument("learnable mask size does not match parameter count");
  }
  Tape& tape = Tape::active();
  bound_tape_ = &tape;
  bound_generation_ = tape.generation();
  bound_tape_start_ = tape.size();
  bound_.clear();
  bound_.reserve(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const bool variable = learnable.empty() || learnable[i];
    bound_.push_back(variable ? DiffScalar::variable(values_[i]) : DiffScalar(values_[i]));
  }
  return bound_;
}

bool ParamSet::bound_to_active_tape() const noexcept {
  const Tape& tape = Tape::active();
  return bound_tape_ == &tape && bound_generation_ == tape.generation() &&
         tape.size() >= bound_tape_start_ + bound_.size();
}

std::vector<double> gradient(const DiffScalar& loss, const ParamSet& params) {
  if (loss.is_constant()) {
    throw StructuralError("loss is a constant and is not connected to any parameter");
  }
  if (!params.bound_to_active_tape()) {
    throw StructuralError("parameters are not bound to the active tape");
  }
  const auto root = static_cast<std::size_t>(loss.id());
  const Tape& tape = Tape::active();
  if (root >= tape.size() || root < params.bound_tape_start_) {
    throw StructuralError("loss was not recorded after the parameters were bound");
  }
  std::vector<double> adjoints(root + 1, 0.0);
  adjoints[root] = 1.0;
  tape.propagate(adjoints, root + 1, params.bound_tape_start_);

  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const DiffScalar& p = params.bound_[i];
    if (!p.is_constant()) grad[i] = adjoints[static_cast<std::size_t>(p.id())];
  }
  return grad;
}

}  // namespace diffnea
