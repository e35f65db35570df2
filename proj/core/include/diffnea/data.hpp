#pragma once

// Simulated identification datasets and their JSON Lines format.
//
// Line 1 holds a metadata object, every further line one sample as a flat
// array [q..., qd..., tau_d..., qdd...] written with 17 significant digits.
// Files may be gzip-compressed; load() detects that transparently.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffnea/systems.hpp"

namespace diffnea {

inline constexpr int kDatasetVersion = 1;

struct Sample {
  std::vector<double> q;
  std::vector<double> qd;
  std::vector<double> tau;  // desired torque tau_d
  std::vector<double> qdd;  // label
};

struct DatasetMeta {
  std::string system;
  std::string regime;  // "uniform" | "trajectory"
  std::uint64_t seed = 0;
  double dt = 0.0;     // sampling period of trajectory data, 0 for uniform
  double state_noise = 0.0;
  double action_noise = 0.0;
  std::uint64_t plant_hash = 0;
  std::size_t dof = 0;
  nlohmann::json plant;                   // Plant::to_json() of the generating plant
  std::vector<std::size_t> episode_starts;  // trajectory regime only
  nlohmann::json extra = nlohmann::json::object();  // generator settings, echoed verbatim
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  /// [begin, end) sample ranges of the episodes (a single range for uniform data).
  std::vector<std::pair<std::size_t, std::size_t>> episodes() const;
};

struct UniformRanges {
  std::vector<double> q_lo, q_hi, qd_lo, qd_hi, tau_lo, tau_hi;

  /// Full joint ranges, qd in [-20, 20] (cart: [-2, 2] m/s), torque only on
  /// the actuated joint.
  static UniformRanges defaults(SystemKind kind);
  bool contains(const Sample& s) const;
};

nlohmann::json to_json(const UniformRanges& r);
UniformRanges uniform_ranges_from_json(const nlohmann::json& doc, SystemKind kind);

/// i.i.d. states and torques with labels from the closed-form forward
/// dynamics of the frictionless plant (ideal observations); the metadata
/// records that frictionless plant.
Dataset generate_uniform(const Plant& plant, std::size_t n, const UniformRanges& ranges, std::uint64_t seed);

struct TrajectoryConfig {
  std::size_t episodes = 10;
  double duration = 30.0;       // s per episode
  double dt = 1.0 / 250.0;
  double state_noise = 1e-3;    // std of additive noise on recorded q and qd
  double action_noise = 1e-2;   // std of noise added to the applied torque
  double initial_spread = 0.1;  // rad, std of the initial pendulum angle
  SwingUpConfig controller;

  static TrajectoryConfig defaults(SystemKind kind);
};

nlohmann::json to_json(const TrajectoryConfig& cfg);
TrajectoryConfig trajectory_config_from_json(const nlohmann::json& doc, SystemKind kind);

/// Swing-up episodes integrated with RK4. Each episode yields
/// duration / dt samples; labels are central differences of the recorded
/// velocities, so the two endpoint states of an episode are dropped.
Dataset generate_trajectory(const Plant& plant, const TrajectoryConfig& cfg, std::uint64_t seed);

/// Per-episode seeds derived from the master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

std::string serialize(const Dataset& ds);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
/// Throws ParseError (with 1-based line number) on malformed content.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& text);

}  // namespace diffnea
