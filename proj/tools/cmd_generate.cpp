#include <iostream>

#include <fmt/format.h>

#include "common.hpp"
#include "diffnea/data.hpp"
#include "diffnea/systems.hpp"

namespace diffnea::cli {

namespace {

struct GenerateFlags {
  std::string config;
  std::string system = "cartpole";
  std::string regime = "uniform";
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  std::size_t episodes = 10;
  double duration = 30.0;
  double dt = 1.0 / 250.0;
  double state_noise = 1e-3;
  double action_noise = 1e-2;
  std::string out;
  CLI::App* app = nullptr;
};

Plant plant_from(const ConfigFile& cfg, const std::string& system) {
  nlohmann::json doc = {{"system", system}};
  if (cfg.doc.contains("plant")) doc["plant"] = cfg.section("plant");
  return Plant::from_json(doc);
}

int run(const GenerateFlags& f, int argc, char** argv) {
  const ConfigFile cfg = ConfigFile::load(f.config);
  const nlohmann::json gen = cfg.section("generate");
  const CLI::App& a = *f.app;

  std::string system = cfg.doc.value("system", f.system);
  if (given(a.get_option("--system"))) system = f.system;
  std::string regime = gen.value("regime", f.regime);
  if (given(a.get_option("--regime"))) regime = f.regime;
  std::uint64_t seed = gen.value("seed", f.seed);
  if (given(a.get_option("--seed"))) seed = f.seed;

  SystemKind kind;
  try {
    kind = system_kind_from_string(system);
  } catch (const std::exception&) {
    throw UsageError("--system must be cartpole or furuta, got '" + system + "'");
  }
  if (regime != "uniform" && regime != "trajectory") {
    throw UsageError("--regime must be uniform or trajectory, got '" + regime + "'");
  }
  const Plant plant = plant_from(cfg, system);

  nlohmann::json effective = {{"system", system}, {"plant", plant.to_json()}};
  nlohmann::json gen_eff = {{"regime", regime}, {"seed", seed}};
  Dataset ds;
  if (regime == "uniform") {
    std::size_t n = gen.value("n", f.n);
    if (given(a.get_option("--n"))) n = f.n;
    const UniformRanges ranges = gen.contains("uniform") ? uniform_ranges_from_json(gen["uniform"], kind)
                                                         : UniformRanges::defaults(kind);
    gen_eff["n"] = n;
    gen_eff["uniform"] = to_json(ranges);
    effective["generate"] = gen_eff;
    ds = generate_uniform(plant, n, ranges, seed);
  } else {
    TrajectoryConfig tc = gen.contains("trajectory") ? trajectory_config_from_json(gen["trajectory"], kind)
                                                     : TrajectoryConfig::defaults(kind);
    if (given(a.get_option("--episodes"))) tc.episodes = f.episodes;
    if (given(a.get_option("--duration"))) tc.duration = f.duration;
    if (given(a.get_option("--dt"))) tc.dt = f.dt;
    if (given(a.get_option("--state-noise"))) tc.state_noise = f.state_noise;
    if (given(a.get_option("--action-noise"))) tc.action_noise = f.action_noise;
    if (tc.episodes == 0) throw UsageError("--episodes must be positive");
    if (!(tc.dt > 0.0) || !(tc.duration >= 3.0 * tc.dt)) throw UsageError("--duration must span at least 3 steps of --dt");
    if (!(tc.state_noise >= 0.0) || !(tc.action_noise >= 0.0)) throw UsageError("noise levels must be non-negative");
    gen_eff["trajectory"] = to_json(tc);
    effective["generate"] = gen_eff;
    ds = generate_trajectory(plant, tc, seed);
  }
  ds.meta.extra["effective_config"] = effective;

  const auto path = resolve_output(f.out, fmt::format("{}_{}_s{}.jsonl", system, regime, seed));
  save_dataset(ds, path);

  Manifest manifest("generate", argc, argv);
  manifest.set_config(cfg);
  manifest.set_effective_config(effective);
  manifest.add_artifact(path);
  manifest.set("samples", ds.size());
  const auto mpath = manifest.write(path.string() + ".manifest.json");
  std::cout << fmt::format("wrote {} ({} samples, {} episodes)\n", path.string(), ds.size(), ds.episodes().size());
  std::cout << fmt::format("manifest {}\n", mpath.string());
  return kExitOk;
}

}  // namespace

Handler register_generate(CLI::App& app) {
  auto f = std::make_shared<GenerateFlags>();
  f->app = &app;
  app.add_option("--config", f->config, "JSON config file");
  app.add_option("--system", f->system, "cartpole or furuta")->capture_default_str();
  app.add_option("--regime", f->regime, "uniform or trajectory")->capture_default_str();
  app.add_option("--n", f->n, "Number of uniform samples")->capture_default_str();
  app.add_option("--seed", f->seed, "Master seed")->capture_default_str();
  app.add_option("--episodes", f->episodes, "Trajectory episodes");
  app.add_option("--duration", f->duration, "Seconds per episode");
  app.add_option("--dt", f->dt, "Sampling period");
  app.add_option("--state-noise", f->state_noise, "Std of noise on recorded q and qd");
  app.add_option("--action-noise", f->action_noise, "Std of noise on the applied torque");
  app.add_option("-o,--out", f->out, "Output file (default $DIFFNEA_OUT/<system>_<regime>_s<seed>.jsonl)");
  return [f](int argc, char** argv) { return run(*f, argc, argv); };
}

}  // namespace diffnea::cli
