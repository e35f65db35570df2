#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "common.hpp"
#include "diffnea/gradcheck.hpp"

namespace diffnea::cli {

namespace {

struct GradcheckFlags {
  std::string config;
  std::size_t states = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  std::string systems;
  std::string actuators;
  std::string hidden;
  std::string out;
  CLI::App* app = nullptr;
};

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

int run(const GradcheckFlags& f, int argc, char** argv) {
  const ConfigFile cfg = ConfigFile::load(f.config);
  const nlohmann::json sec = cfg.section("gradcheck");
  const CLI::App& a = *f.app;
  auto has = [&](const char* name) { return given(a.get_option(name)); };

  GradcheckConfig gc;
  gc.states = has("--states") ? f.states : sec.value("states", f.states);
  gc.seed = has("--seed") ? f.seed : sec.value("seed", f.seed);
  gc.tolerance = has("--tolerance") ? f.tolerance : sec.value("tolerance", f.tolerance);
  if (sec.contains("hidden")) gc.hidden = sec["hidden"].get<std::vector<std::size_t>>();
  if (has("--hidden")) gc.hidden = parse_sizes(f.hidden, "--hidden");
  std::vector<std::string> systems, actuators;
  if (sec.contains("systems")) systems = sec["systems"].get<std::vector<std::string>>();
  if (sec.contains("actuators")) actuators = sec["actuators"].get<std::vector<std::string>>();
  if (has("--systems")) systems = split(f.systems);
  if (has("--actuators")) actuators = split(f.actuators);
  if (!systems.empty()) {
    gc.systems.clear();
    for (const auto& s : systems) gc.systems.push_back(system_kind_from_string(s));
  }
  if (!actuators.empty()) {
    gc.actuators.clear();
    for (const auto& s : actuators) gc.actuators.push_back(actuator_kind_from_string(s));
  }
  if (gc.states == 0) throw UsageError("--states must be positive");
  if (!(gc.tolerance > 0.0)) throw UsageError("--tolerance must be positive");

  nlohmann::json sys_names = nlohmann::json::array(), act_names = nlohmann::json::array();
  for (auto s : gc.systems) sys_names.push_back(std::string(to_string(s)));
  for (auto k : gc.actuators) act_names.push_back(std::string(to_string(k)));
  const nlohmann::json effective = {{"gradcheck",
                                     {{"states", gc.states},
                                      {"seed", gc.seed},
                                      {"tolerance", gc.tolerance},
                                      {"hidden", gc.hidden},
                                      {"systems", sys_names},
                                      {"actuators", act_names}}}};

  const GradcheckReport report = run_gradcheck(gc);
  for (const auto& c : report.cases) {
    std::cout << fmt::format("{:4} {:9} {:12} {:4} params x {:3} states  max rel err {:.2e}  ({}) {:.1f} s\n",
                             c.passed() ? "ok" : "FAIL", to_string(c.system), to_string(c.actuator), c.params,
                             c.states, c.max_rel_error, c.worst_param, c.seconds);
  }
  std::cout << fmt::format("{} ({} cases, tolerance {:.0e}, {:.1f} s)\n", report.passed() ? "PASSED" : "FAILED",
                           report.cases.size(), report.tolerance, report.seconds);

  const auto path = resolve_output(f.out, "gradcheck.json");
  nlohmann::json doc = report.to_json();
  doc["effective_config"] = effective;
  write_json(path, doc);
  Manifest manifest("gradcheck", argc, argv);
  manifest.set_config(cfg);
  manifest.set_effective_config(effective);
  manifest.add_artifact(path);
  manifest.set("passed", report.passed());
  manifest.write(path.string() + ".manifest.json");
  return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

Handler register_gradcheck(CLI::App& app) {
  auto f = std::make_shared<GradcheckFlags>();
  f->app = &app;
  app.add_option("--config", f->config, "JSON config file ('gradcheck' section)");
  app.add_option("--states", f->states, "Random states per case")->capture_default_str();
  app.add_option("--seed", f->seed, "Seed")->capture_default_str();
  app.add_option("--tolerance", f->tolerance, "Relative error bound")->capture_default_str();
  app.add_option("--systems", f->systems, "Comma list (default cartpole,furuta)");
  app.add_option("--actuators", f->actuators, "Comma list (default all six)");
  app.add_option("--hidden", f->hidden, "Actuator network hidden sizes")->capture_default_str();
  app.add_option("-o,--out", f->out, "Report JSON (default $DIFFNEA_OUT/gradcheck.json)");
  return [f](int argc, char** argv) { return run(*f, argc, argv); };
}

}  // namespace diffnea::cli
