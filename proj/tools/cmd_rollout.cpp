#include <iostream>

#include <fmt/format.h>

#include "common.hpp"
#include "evaluate.hpp"

namespace diffnea::cli {

namespace {

struct RolloutFlags {
  std::string config;
  std::string fit;
  double duration = 10.0;
  double dt = kDefaultDt;
  double threshold = 0.1;
  std::string q;
  std::string qd;
  std::string out_dir;
  std::string prefix;
  CLI::App* app = nullptr;
};

int run(const RolloutFlags& f, int argc, char** argv) {
  const ConfigFile cfg = ConfigFile::load(f.config);
  const nlohmann::json sec = cfg.section("rollout");
  const CLI::App& a = *f.app;
  auto has = [&](const char* name) { return given(a.get_option(name)); };

  const FitResult fit = FitResult::load(f.fit);
  const Plant plant = plant_for(fit);

  RolloutSpec spec;
  spec.start = default_start(plant.dof());
  spec.duration = has("--duration") ? f.duration : sec.value("duration", f.duration);
  spec.dt = has("--dt") ? f.dt : sec.value("dt", f.dt);
  spec.threshold = has("--threshold") ? f.threshold : sec.value("threshold", f.threshold);
  if (sec.contains("q")) spec.start.q = sec["q"].get<std::vector<double>>();
  if (sec.contains("qd")) spec.start.qd = sec["qd"].get<std::vector<double>>();
  if (has("--q")) spec.start.q = parse_list(f.q, "--q");
  if (has("--qd")) spec.start.qd = parse_list(f.qd, "--qd");
  if (!(spec.dt > 0.0) || !(spec.duration > 0.0)) throw UsageError("--duration and --dt must be positive");
  if (!(spec.threshold > 0.0)) throw UsageError("--threshold must be positive");
  if (spec.start.q.size() != plant.dof() || spec.start.qd.size() != plant.dof()) {
    throw UsageError(fmt::format("--q and --qd need {} values", plant.dof()));
  }

  const nlohmann::json effective = {{"rollout",
                                     {{"duration", spec.duration},
                                      {"dt", spec.dt},
                                      {"threshold", spec.threshold},
                                      {"q", spec.start.q},
                                      {"qd", spec.start.qd}}},
                                    {"fit", f.fit}};
  const RolloutEval r = evaluate_rollout(fit, plant, spec);

  std::string prefix = f.prefix;
  if (prefix.empty()) {
    prefix = std::filesystem::path(f.fit).filename().string();
    const auto pos = prefix.find(".fit.json");
    if (pos != std::string::npos) prefix.erase(pos);
  }
  const auto base = resolve_output(f.out_dir.empty() ? "" : (std::filesystem::path(f.out_dir) / prefix).string(),
                                   prefix);
  const std::filesystem::path model_csv = base.string() + ".model.csv";
  const std::filesystem::path plant_csv = base.string() + ".plant.csv";
  const std::filesystem::path model_svg = base.string() + ".model.svg";
  const std::filesystem::path plant_svg = base.string() + ".plant.svg";
  const std::filesystem::path metrics = base.string() + ".metrics.json";
  write_csv(r.model, model_csv);
  write_csv(r.plant, plant_csv);
  write_svg(r.model, model_svg, prefix + " (model)");
  write_svg(r.plant, plant_svg, prefix + " (plant)");
  nlohmann::json doc = r.to_json();
  doc["effective_config"] = effective;
  write_json(metrics, doc);

  Manifest manifest("rollout", argc, argv);
  manifest.set_config(cfg);
  manifest.set_effective_config(effective);
  manifest.add_input(f.fit);
  for (const auto& p : {model_csv, plant_csv, model_svg, plant_svg, metrics}) manifest.add_artifact(p);
  const auto mpath = manifest.write(base.string() + ".manifest.json");

  std::cout << fmt::format("{}: class {}, verdict {}, horizon {:.3f} s, diverged {}\n", prefix, r.energy_class,
                           r.verdict, r.metrics.horizon_seconds, r.model.diverged ? "yes" : "no");
  std::cout << fmt::format("wrote {}\nmanifest {}\n", metrics.string(), mpath.string());
  return kExitOk;
}

}  // namespace

Handler register_rollout(CLI::App& app) {
  auto f = std::make_shared<RolloutFlags>();
  f->app = &app;
  app.add_option("--config", f->config, "JSON config file ('rollout' section)");
  app.add_option("-f,--fit", f->fit, "FitResult JSON")->required();
  app.add_option("--duration", f->duration, "Seconds")->capture_default_str();
  app.add_option("--dt", f->dt, "Integration step")->capture_default_str();
  app.add_option("--q", f->q, "Start positions, comma separated (default all zero)");
  app.add_option("--qd", f->qd, "Start velocities (default 0.01 on the pendulum joint)");
  app.add_option("--threshold", f->threshold, "State error defining the prediction horizon")->capture_default_str();
  app.add_option("--out-dir", f->out_dir, "Output directory (default $DIFFNEA_OUT)");
  app.add_option("--prefix", f->prefix, "File name prefix (default: the fit's name)");
  return [f](int argc, char** argv) { return run(*f, argc, argv); };
}

}  // namespace diffnea::cli
