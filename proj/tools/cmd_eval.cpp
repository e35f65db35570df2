#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <thread>

#include <fmt/format.h>

#include "common.hpp"
#include "evaluate.hpp"

namespace diffnea::cli {

namespace fs = std::filesystem;

namespace {

struct EvalFlags {
  std::string config;
  std::string dir;
  std::string out_dir;
  std::size_t jobs = 1;
  double duration = 10.0;
  double dt = kDefaultDt;
  double threshold = 0.1;
  double qd_pendulum = 0.01;
  CLI::App* app = nullptr;
};

struct Row {
  std::string file;
  nlohmann::json cells = nlohmann::json::object();
  std::string error;
};

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Row evaluate_file(const fs::path& path, const RolloutSpec& base) {
  Row row;
  row.file = path.filename().string();
  try {
    const FitResult fit = FitResult::load(path);
    const Plant plant = plant_for(fit);
    RolloutSpec spec = base;
    if (spec.start.q.size() != plant.dof()) {
      const double qd_pend = spec.start.qd.size() > 1 ? spec.start.qd[1] : 0.01;
      spec.start = default_start(plant.dof(), qd_pend);
    }
    const RolloutEval r = evaluate_rollout(fit, plant, spec);
    const auto& ds = fit.dataset;
    row.cells = {
        {"model", std::string(to_string(fit.config.model))},
        {"actuator", std::string(to_string(fit.config.actuator.kind))},
        {"init", std::string(to_string(fit.config.init))},
        {"system", plant.name()},
        {"dataset", fmt::format("{}/{}/s{}", ds.value("system", "?"), ds.value("regime", "?"),
                                ds.contains("seed") ? ds["seed"].dump() : "?")},
        {"validation_mse", fit.validation_mse},
        {"rmse", mean(r.metrics.rmse)},
        {"horizon_s", r.metrics.horizon_seconds},
        {"diverged", r.model.diverged},
        {"energy_class", r.energy_class},
        {"max_energy_rise", std::isfinite(r.max_rise) ? nlohmann::json(r.max_rise) : nlohmann::json(nullptr)},
        {"verdict", r.verdict}};
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

const std::vector<std::string> kColumns = {"file",     "model",    "actuator",     "init",
                                           "system",   "dataset",  "validation_mse", "rmse",
                                           "horizon_s", "diverged", "energy_class", "max_energy_rise",
                                           "verdict"};

std::string cell_text(const Row& row, const std::string& col) {
  if (col == "file") return row.file;
  if (!row.error.empty()) return col == "verdict" ? "ERROR: " + row.error : "";
  const auto& v = row.cells.at(col);
  if (v.is_null()) return col == "max_energy_rise" ? "inf" : "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
  if (v.is_number_float()) return fmt::format("{:.4g}", v.get<double>());
  return v.dump();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

int run(const EvalFlags& f, int argc, char** argv) {
  const ConfigFile cfg = ConfigFile::load(f.config);
  const nlohmann::json sec = cfg.section("eval");
  const CLI::App& a = *f.app;
  auto has = [&](const char* name) { return given(a.get_option(name)); };

  RolloutSpec spec;
  spec.duration = has("--duration") ? f.duration : sec.value("duration", f.duration);
  spec.dt = has("--dt") ? f.dt : sec.value("dt", f.dt);
  spec.threshold = has("--threshold") ? f.threshold : sec.value("threshold", f.threshold);
  std::size_t jobs = has("--jobs") ? f.jobs : sec.value("jobs", f.jobs);
  double qd_pend = sec.value("qd_pendulum", 0.01);
  if (has("--qd-pendulum")) qd_pend = f.qd_pendulum;
  if (jobs == 0) throw UsageError("--jobs must be at least 1");
  if (!(spec.dt > 0.0) || !(spec.duration > 0.0) || !(spec.threshold > 0.0)) {
    throw UsageError("--duration, --dt and --threshold must be positive");
  }
  spec.start = default_start(2, qd_pend);

  const fs::path dir = f.dir;
  if (!fs::is_directory(dir)) throw IoError("results directory not found: " + dir.string());
  std::vector<fs::path> fits;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 9 && name.ends_with(".fit.json")) fits.push_back(entry.path());
  }
  std::sort(fits.begin(), fits.end());
  if (fits.empty()) std::cerr << "warning: no *.fit.json files in " << dir.string() << "; the report is empty\n";

  std::vector<Row> rows(fits.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < fits.size(); i = next++) rows[i] = evaluate_file(fits[i], spec);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(jobs, fits.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const nlohmann::json effective = {{"eval",
                                     {{"duration", spec.duration},
                                      {"dt", spec.dt},
                                      {"threshold", spec.threshold},
                                      {"jobs", jobs},
                                      {"qd_pendulum", qd_pend}}},
                                    {"dir", dir.string()}};

  nlohmann::json table = nlohmann::json::array();
  std::string csv, md;
  for (std::size_t c = 0; c < kColumns.size(); ++c) csv += (c ? "," : "") + kColumns[c];
  csv += "\n";
  md = "| " + fmt::format("{}", fmt::join(kColumns, " | ")) + " |\n|";
  for (std::size_t c = 0; c < kColumns.size(); ++c) md += "---|";
  md += "\n";
  std::size_t violations = 0, errors = 0;
  for (const auto& row : rows) {
    nlohmann::json j = row.cells;
    j["file"] = row.file;
    if (!row.error.empty()) {
      j["error"] = row.error;
      ++errors;
    } else if (row.cells["verdict"].get<std::string>().starts_with("VIOLATION")) {
      ++violations;
    }
    table.push_back(j);
    std::vector<std::string> cells;
    for (const auto& col : kColumns) cells.push_back(cell_text(row, col));
    for (std::size_t c = 0; c < cells.size(); ++c) csv += (c ? "," : "") + csv_escape(cells[c]);
    csv += "\n";
    md += "| " + fmt::format("{}", fmt::join(cells, " | ")) + " |\n";
  }

  const fs::path out = f.out_dir.empty() ? dir : fs::path(f.out_dir);
  fs::create_directories(out);
  const fs::path json_path = out / "report.json";
  const fs::path csv_path = out / "report.csv";
  const fs::path md_path = out / "report.md";
  write_json(json_path, {{"effective_config", effective}, {"rows", table}, {"violations", violations}, {"errors", errors}});
  write_text(csv_path, csv);
  write_text(md_path, md);

  Manifest manifest("eval", argc, argv);
  manifest.set_config(cfg);
  manifest.set_effective_config(effective);
  for (const auto& p : fits) manifest.add_input(p);
  for (const auto& p : {json_path, csv_path, md_path}) manifest.add_artifact(p);
  const auto mpath = manifest.write(out / "report.manifest.json");

  std::cout << md;
  std::cout << fmt::format("{} fits, {} energy-class violations, {} errors\nwrote {}\nmanifest {}\n", rows.size(),
                           violations, errors, json_path.string(), mpath.string());
  return kExitOk;
}

}  // namespace

Handler register_eval(CLI::App& app) {
  auto f = std::make_shared<EvalFlags>();
  f->app = &app;
  app.add_option("--config", f->config, "JSON config file ('eval' section)");
  app.add_option("--dir", f->dir, "Directory holding *.fit.json results")->required();
  app.add_option("--out-dir", f->out_dir, "Where report.{json,csv,md} go (default: --dir)");
  app.add_option("-j,--jobs", f->jobs, "Worker threads")->capture_default_str();
  app.add_option("--duration", f->duration, "Rollout seconds")->capture_default_str();
  app.add_option("--dt", f->dt, "Integration step")->capture_default_str();
  app.add_option("--threshold", f->threshold, "State error defining the prediction horizon")->capture_default_str();
  app.add_option("--qd-pendulum", f->qd_pendulum, "Initial pendulum velocity of the hanging start")->capture_default_str();
  return [f](int argc, char** argv) { return run(*f, argc, argv); };
}

}  // namespace diffnea::cli
