#include "diffnea/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <zlib.h>

#include "diffnea/errors.hpp"
#include "diffnea/sim.hpp"

namespace diffnea {

namespace {

constexpr const char* kFormat = "diffnea-dataset";

void append_number(std::string& out, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

std::vector<double> read_vec(const nlohmann::json& doc, const char* key, const std::vector<double>& fallback) {
  return doc.contains(key) ? doc[key].get<std::vector<double>>() : fallback;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> Dataset::episodes() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (meta.episode_starts.empty()) {
    out.emplace_back(0, samples.size());
    return out;
  }
  for (std::size_t e = 0; e < meta.episode_starts.size(); ++e) {
    const std::size_t end = e + 1 < meta.episode_starts.size() ? meta.episode_starts[e + 1] : samples.size();
    out.emplace_back(meta.episode_starts[e], end);
  }
  return out;
}

UniformRanges UniformRanges::defaults(SystemKind kind) {
  constexpr double kPi = std::numbers::pi;
  UniformRanges r;
  if (kind == SystemKind::kCartpole) {
    r.q_lo = {-0.4, -kPi};
    r.q_hi = {0.4, kPi};
    r.qd_lo = {-2.0, -20.0};
    r.qd_hi = {2.0, 20.0};
    r.tau_lo = {-5.0, 0.0};
    r.tau_hi = {5.0, 0.0};
  } else {
    r.q_lo = {-kPi, -kPi};
    r.q_hi = {kPi, kPi};
    r.qd_lo = {-20.0, -20.0};
    r.qd_hi = {20.0, 20.0};
    r.tau_lo = {-0.2, 0.0};
    r.tau_hi = {0.2, 0.0};
  }
  return r;
}

bool UniformRanges::contains(const Sample& s) const {
  for (std::size_t i = 0; i < s.q.size(); ++i) {
    if (s.q[i] < q_lo[i] || s.q[i] > q_hi[i]) return false;
    if (s.qd[i] < qd_lo[i] || s.qd[i] > qd_hi[i]) return false;
    if (s.tau[i] < tau_lo[i] || s.tau[i] > tau_hi[i]) return false;
  }
  return true;
}

nlohmann::json to_json(const UniformRanges& r) {
  return {{"q_lo", r.q_lo}, {"q_hi", r.q_hi}, {"qd_lo", r.qd_lo},
          {"qd_hi", r.qd_hi}, {"tau_lo", r.tau_lo}, {"tau_hi", r.tau_hi}};
}

UniformRanges uniform_ranges_from_json(const nlohmann::json& doc, SystemKind kind) {
  UniformRanges r = UniformRanges::defaults(kind);
  r.q_lo = read_vec(doc, "q_lo", r.q_lo);
  r.q_hi = read_vec(doc, "q_hi", r.q_hi);
  r.qd_lo = read_vec(doc, "qd_lo", r.qd_lo);
  r.qd_hi = read_vec(doc, "qd_hi", r.qd_hi);
  r.tau_lo = read_vec(doc, "tau_lo", r.tau_lo);
  r.tau_hi = read_vec(doc, "tau_hi", r.tau_hi);
  return r;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 over the pair.
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Dataset generate_uniform(const Plant& source, std::size_t n, const UniformRanges& ranges, std::uint64_t seed) {
  const Plant plant = source.frictionless();
  const std::size_t dof = plant.dof();
  for (const auto* v : {&ranges.q_lo, &ranges.q_hi, &ranges.qd_lo, &ranges.qd_hi, &ranges.tau_lo, &ranges.tau_hi}) {
    if (v->size() != dof) throw std::invalid_argument("uniform ranges must cover every joint");
  }
  Dataset ds;
  ds.meta.system = plant.name();
  ds.meta.regime = "uniform";
  ds.meta.seed = seed;
  ds.meta.plant_hash = plant.hash();
  ds.meta.dof = dof;
  ds.meta.plant = plant.to_json();
  ds.meta.extra = {{"ranges", to_json(ranges)}};
  ds.samples.reserve(n);

  std::mt19937_64 rng(seed);
  auto draw = [&rng](double lo, double hi) {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  for (std::size_t k = 0; k < n; ++k) {
    Sample s{std::vector<double>(dof), std::vector<double>(dof), std::vector<double>(dof), {}};
    for (std::size_t i = 0; i < dof; ++i) s.q[i] = draw(ranges.q_lo[i], ranges.q_hi[i]);
    for (std::size_t i = 0; i < dof; ++i) s.qd[i] = draw(ranges.qd_lo[i], ranges.qd_hi[i]);
    for (std::size_t i = 0; i < dof; ++i) s.tau[i] = draw(ranges.tau_lo[i], ranges.tau_hi[i]);
    const auto a = plant.accel(s.q, s.qd, s.tau);
    s.qdd.assign(a.begin(), a.end());
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

TrajectoryConfig TrajectoryConfig::defaults(SystemKind kind) {
  TrajectoryConfig cfg;
  cfg.controller = SwingUpConfig::defaults(kind);
  if (kind == SystemKind::kFuruta) cfg.action_noise = 1e-3;
  return cfg;
}

nlohmann::json to_json(const TrajectoryConfig& cfg) {
  return {{"episodes", cfg.episodes},         {"duration", cfg.duration},
          {"dt", cfg.dt},                     {"state_noise", cfg.state_noise},
          {"action_noise", cfg.action_noise}, {"initial_spread", cfg.initial_spread},
          {"controller", to_json(cfg.controller)}};
}

TrajectoryConfig trajectory_config_from_json(const nlohmann::json& doc, SystemKind kind) {
  TrajectoryConfig cfg = TrajectoryConfig::defaults(kind);
  cfg.episodes = doc.value("episodes", cfg.episodes);
  cfg.duration = doc.value("duration", cfg.duration);
  cfg.dt = doc.value("dt", cfg.dt);
  cfg.state_noise = doc.value("state_noise", cfg.state_noise);
  cfg.action_noise = doc.value("action_noise", cfg.action_noise);
  cfg.initial_spread = doc.value("initial_spread", cfg.initial_spread);
  if (doc.contains("controller")) cfg.controller = swingup_config_from_json(doc["controller"], kind);
  return cfg;
}

Dataset generate_trajectory(const Plant& plant, const TrajectoryConfig& cfg, std::uint64_t seed) {
  if (!(cfg.dt > 0.0) || !(cfg.duration > 0.0)) throw std::invalid_argument("trajectory dt and duration must be positive");
  const std::size_t dof = plant.dof();
  const auto per_episode = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
  const auto actuated = plant.actuated();

  Dataset ds;
  ds.meta.system = plant.name();
  ds.meta.regime = "trajectory";
  ds.meta.seed = seed;
  ds.meta.dt = cfg.dt;
  ds.meta.state_noise = cfg.state_noise;
  ds.meta.action_noise = cfg.action_noise;
  ds.meta.plant_hash = plant.hash();
  ds.meta.dof = dof;
  ds.meta.plant = plant.to_json();
  ds.meta.extra = {{"trajectory", to_json(cfg)}};
  ds.samples.reserve(cfg.episodes * per_episode);

  const PlantModel model(plant);
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    std::mt19937_64 rng(derive_seed(seed, e));
    std::normal_distribution<double> unit(0.0, 1.0);
    SwingUpController controller(plant, cfg.controller);

    // Simulate per_episode + 1 steps so every kept sample has both neighbours.
    std::vector<State> states;
    std::vector<std::vector<double>> commanded;
    states.reserve(per_episode + 2);
    State s{std::vector<double>(dof, 0.0), std::vector<double>(dof, 0.0)};
    s.q[plant.pendulum_joint()] = cfg.initial_spread * unit(rng);
    s.qd[plant.pendulum_joint()] = 0.01;
    for (std::size_t k = 0; k <= per_episode + 1; ++k) {
      states.push_back(s);
      std::vector<double> tau_d = controller(static_cast<double>(k) * cfg.dt, s.q, s.qd);
      std::vector<double> applied = tau_d;
      for (std::size_t i = 0; i < dof; ++i) {
        if (actuated[i]) applied[i] += cfg.action_noise * unit(rng);
      }
      commanded.push_back(std::move(tau_d));
      if (k == per_episode + 1) break;
      auto next = rk4_step(model, s, applied, cfg.dt);
      if (!next) throw std::runtime_error("plant simulation diverged while generating trajectories");
      s = std::move(*next);
    }

    std::vector<State> observed = states;
    for (State& o : observed) {
      for (double& x : o.q) x += cfg.state_noise * unit(rng);
      for (double& x : o.qd) x += cfg.state_noise * unit(rng);
    }

    ds.meta.episode_starts.push_back(ds.samples.size());
    for (std::size_t k = 1; k <= per_episode; ++k) {
      Sample smp{observed[k].q, observed[k].qd, commanded[k], std::vector<double>(dof)};
      for (std::size_t i = 0; i < dof; ++i) {
        smp.qdd[i] = (observed[k + 1].qd[i] - observed[k - 1].qd[i]) / (2.0 * cfg.dt);
      }
      ds.samples.push_back(std::move(smp));
    }
  }
  return ds;
}

std::string serialize(const Dataset& ds) {
  nlohmann::ordered_json meta;
  meta["format"] = kFormat;
  meta["version"] = kDatasetVersion;
  meta["system"] = ds.meta.system;
  meta["regime"] = ds.meta.regime;
  meta["seed"] = ds.meta.seed;
  meta["dt"] = ds.meta.dt;
  meta["state_noise"] = ds.meta.state_noise;
  meta["action_noise"] = ds.meta.action_noise;
  meta["plant_hash"] = ds.meta.plant_hash;
  meta["dof"] = ds.meta.dof;
  meta["n"] = ds.samples.size();
  meta["episode_starts"] = ds.meta.episode_starts;
  meta["plant"] = nlohmann::ordered_json::parse(ds.meta.plant.dump());
  meta["extra"] = nlohmann::ordered_json::parse(ds.meta.extra.dump());

  std::string out = meta.dump();
  out.push_back('\n');
  out.reserve(out.size() + ds.samples.size() * ds.meta.dof * 4 * 24);
  for (const Sample& s : ds.samples) {
    out.push_back('[');
    bool first = true;
    for (const auto* v : {&s.q, &s.qd, &s.tau, &s.qdd}) {
      for (const double x : *v) {
        if (!first) out.push_back(',');
        first = false;
        append_number(out, x);
      }
    }
    out += "]\n";
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  const std::string text = serialize(ds);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing dataset " + path.string());
}

namespace {

std::vector<double> parse_row(const std::string& line, std::size_t lineno) {
  std::vector<double> row;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end && (*p == ' ' || *p == '\r')) ++p;
  while (end > p && (end[-1] == ' ' || end[-1] == '\r')) --end;
  if (p == end || *p != '[' || end[-1] != ']') throw ParseError(lineno, "sample must be a JSON array");
  ++p;
  --end;
  if (p == end) return row;
  while (true) {
    while (p < end && *p == ' ') ++p;
    double x = 0.0;
    const auto res = std::from_chars(p, end, x);
    if (res.ec != std::errc()) {
      throw ParseError(lineno, "malformed number '" + std::string(p, std::min<std::size_t>(16, end - p)) + "'");
    }
    if (!std::isfinite(x)) throw ParseError(lineno, "non-finite value in sample");
    row.push_back(x);
    p = res.ptr;
    while (p < end && *p == ' ') ++p;
    if (p == end) break;
    if (*p != ',') throw ParseError(lineno, "expected ',' between numbers");
    ++p;
  }
  return row;
}

}  // namespace

Dataset parse_dataset(const std::string& text) {
  Dataset ds;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  bool have_meta = false;
  std::size_t expected = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    if (!have_meta) {
      nlohmann::json meta;
      try {
        meta = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(lineno, std::string("invalid metadata: ") + e.what());
      }
      if (!meta.is_object() || meta.value("format", "") != kFormat) throw ParseError(lineno, "not a diffnea dataset");
      if (meta.value("version", -1) != kDatasetVersion) {
        throw ParseError(lineno, "unsupported dataset version " + meta.value("version", nlohmann::json(-1)).dump());
      }
      try {
        ds.meta.system = meta.at("system").get<std::string>();
        ds.meta.regime = meta.at("regime").get<std::string>();
        ds.meta.seed = meta.at("seed").get<std::uint64_t>();
        ds.meta.dt = meta.at("dt").get<double>();
        ds.meta.state_noise = meta.at("state_noise").get<double>();
        ds.meta.action_noise = meta.at("action_noise").get<double>();
        ds.meta.plant_hash = meta.at("plant_hash").get<std::uint64_t>();
        ds.meta.dof = meta.at("dof").get<std::size_t>();
        ds.meta.episode_starts = meta.value("episode_starts", std::vector<std::size_t>{});
        ds.meta.plant = meta.value("plant", nlohmann::json::object());
        ds.meta.extra = meta.value("extra", nlohmann::json::object());
        expected = meta.at("n").get<std::size_t>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(lineno, std::string("incomplete metadata: ") + e.what());
      }
      if (ds.meta.dof == 0) throw ParseError(lineno, "dataset dof must be positive");
      ds.samples.reserve(expected);
      have_meta = true;
      continue;
    }
    const std::vector<double> row = parse_row(line, lineno);
    const std::size_t d = ds.meta.dof;
    if (row.size() != 4 * d) {
      throw ParseError(lineno, "expected " + std::to_string(4 * d) + " numbers, found " + std::to_string(row.size()));
    }
    Sample s;
    s.q.assign(row.begin(), row.begin() + d);
    s.qd.assign(row.begin() + d, row.begin() + 2 * d);
    s.tau.assign(row.begin() + 2 * d, row.begin() + 3 * d);
    s.qdd.assign(row.begin() + 3 * d, row.end());
    ds.samples.push_back(std::move(s));
  }
  if (!have_meta) throw ParseError(1, "empty dataset file");
  if (ds.samples.size() != expected) {
    throw ParseError(lineno, "metadata announces " + std::to_string(expected) + " samples, file has " +
                                 std::to_string(ds.samples.size()));
  }
  for (const std::size_t start : ds.meta.episode_starts) {
    if (start > ds.samples.size()) throw ParseError(1, "episode start beyond the end of the data");
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open dataset " + path.string());
  std::string text;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) text.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw IoError("failed reading dataset " + path.string());
  return parse_dataset(text);
}

}  // namespace diffnea
