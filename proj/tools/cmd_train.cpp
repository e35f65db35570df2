#include <iostream>
#include <optional>

#include <fmt/format.h>

#include "common.hpp"
#include "diffnea/data.hpp"
#include "diffnea/ident.hpp"
#include "diffnea/systems.hpp"

namespace diffnea::cli {

namespace {

struct TrainFlags {
  std::string config;
  std::string data;
  std::string tree;
  std::string model;
  std::string actuator;
  std::string init;
  std::string hidden;
  std::string ffnn_hidden;
  bool angle_encoding = false;
  std::size_t epochs = 0;
  std::size_t batch = 0;
  std::size_t restarts = 0;
  std::size_t jobs = 0;
  std::uint64_t seed = 0;
  double lr = 0.0;
  double lr_decay = 0.0;
  double min_lr = 0.0;
  double validation_fraction = 0.0;
  double target_loss = 0.0;
  std::string out;
  CLI::App* app = nullptr;
};

int run(const TrainFlags& f, int argc, char** argv) {
  const ConfigFile cfg = ConfigFile::load(f.config);
  const CLI::App& a = *f.app;
  auto has = [&](const char* name) { return given(a.get_option(name)); };

  nlohmann::json train = cfg.section("train");
  if (has("--model")) train["model"] = f.model;
  if (has("--init")) train["init"] = f.init;
  if (has("--actuator") || has("--hidden") || has("--angle-encoding")) {
    nlohmann::json act = train.contains("actuator") ? train["actuator"] : nlohmann::json::object();
    if (has("--actuator")) act["kind"] = f.actuator;
    if (has("--hidden")) act["hidden"] = parse_sizes(f.hidden, "--hidden");
    if (has("--angle-encoding")) act["angle_encoding"] = f.angle_encoding;
    train["actuator"] = act;
  }
  if (has("--ffnn-hidden")) train["ffnn_hidden"] = parse_sizes(f.ffnn_hidden, "--ffnn-hidden");
  if (has("--lr")) train["adam"]["step_size"] = f.lr;
  if (has("--lr-decay")) train["lr_decay"] = f.lr_decay;
  if (has("--min-lr")) train["min_step_size"] = f.min_lr;
  if (has("--epochs")) train["epochs"] = f.epochs;
  if (has("--batch")) train["batch_size"] = f.batch;
  if (has("--restarts")) train["restarts"] = f.restarts;
  if (has("--jobs")) train["jobs"] = f.jobs;
  if (has("--seed")) train["seed"] = f.seed;
  if (has("--validation-fraction")) train["validation_fraction"] = f.validation_fraction;
  if (has("--target-loss")) train["target_loss"] = f.target_loss;
  // Throws std::invalid_argument (exit 2) on bad names or values.
  const TrainConfig tc = train_config_from_json(train);

  const Dataset ds = load_dataset(f.data);
  if (ds.size() == 0) throw UsageError("dataset " + f.data + " has no samples");

  std::optional<KinematicTree> tree;
  nlohmann::json tree_source;
  if (!f.tree.empty()) {
    tree = KinematicTree::load(f.tree);
    tree_source = f.tree;
  } else if (cfg.doc.contains("tree")) {
    tree = KinematicTree::from_json(cfg.doc["tree"]);
    tree_source = "config";
  } else if (!ds.meta.plant.is_null()) {
    tree = Plant::from_json(ds.meta.plant).tree();
    tree_source = "dataset plant";
  } else if (tc.model != ModelKind::kFfnn) {
    throw UsageError("no kinematic tree: pass --tree or add a 'tree' section to the config");
  }
  if (tc.model != ModelKind::kFfnn && tree->dof() != ds.meta.dof) {
    throw UsageError(fmt::format("tree has {} joints but the dataset has {} DoF", tree->dof(), ds.meta.dof));
  }

  const nlohmann::json effective = {{"train", to_json(tc)}, {"data", f.data}, {"tree", tree_source}};
  std::cerr << fmt::format("training {} / {} / {} on {} samples\n", to_string(tc.model), to_string(tc.actuator.kind),
                           to_string(tc.init), ds.size());
  FitResult result = tree ? fit(*tree, ds, tc) : fit_ffnn(ds, tc);
  result.extra["effective_config"] = effective;

  const std::string stem = std::filesystem::path(f.data).stem().string();
  const auto path = resolve_output(
      f.out, fmt::format("{}_{}_{}_{}_s{}.fit.json", stem, to_string(tc.model), to_string(tc.actuator.kind),
                         to_string(tc.init), tc.seed));
  result.save(path);

  Manifest manifest("train", argc, argv);
  manifest.set_config(cfg);
  manifest.set_effective_config(effective);
  manifest.add_input(f.data);
  if (!f.tree.empty()) manifest.add_input(f.tree);
  manifest.add_artifact(path);
  manifest.set("validation_mse", result.validation_mse);
  manifest.set("train_mse", result.train_mse);
  manifest.set("best_epoch", result.best_epoch);
  const auto mpath = manifest.write(path.string() + ".manifest.json");

  std::cout << fmt::format("validation MSE {:.6e} (train {:.6e}, best epoch {})\n", result.validation_mse,
                           result.train_mse, result.best_epoch);
  std::cout << fmt::format("wrote {}\nmanifest {}\n", path.string(), mpath.string());
  return kExitOk;
}

}  // namespace

Handler register_train(CLI::App& app) {
  auto f = std::make_shared<TrainFlags>();
  f->app = &app;
  app.add_option("--config", f->config, "JSON config file ('train' section, optional 'tree')");
  app.add_option("-d,--data", f->data, "Dataset (.jsonl, optionally gzip)")->required();
  app.add_option("--tree", f->tree, "Kinematic tree JSON (default: the dataset's plant)");
  app.add_option("--model", f->model, "diffnea, nokin_diffnea, nea or ffnn");
  app.add_option("--actuator", f->actuator, "none, viscous, stribeck, nn_friction, nn_residual or ffnn");
  app.add_option("--init", f->init, "prior or random");
  app.add_option("--hidden", f->hidden, "Actuator network hidden sizes, e.g. 32,32");
  app.add_flag("--angle-encoding", f->angle_encoding, "Feed sin/cos of revolute angles to actuator networks");
  app.add_option("--ffnn-hidden", f->ffnn_hidden, "FF-NN hidden sizes, e.g. 64,64");
  app.add_option("--epochs", f->epochs, "Training epochs");
  app.add_option("--batch", f->batch, "Mini-batch size");
  app.add_option("--lr", f->lr, "ADAM step size");
  app.add_option("--lr-decay", f->lr_decay, "Step-size decay per epoch");
  app.add_option("--min-lr", f->min_lr, "Lower bound of the decayed step size");
  app.add_option("--restarts", f->restarts, "Random restarts (best validation kept)");
  app.add_option("--jobs", f->jobs, "Threads per batch");
  app.add_option("--seed", f->seed, "Seed");
  app.add_option("--validation-fraction", f->validation_fraction, "Held-out fraction");
  app.add_option("--target-loss", f->target_loss, "Stop once the validation MSE falls below this");
  app.add_option("-o,--out", f->out, "Output FitResult (default $DIFFNEA_OUT/<data>_<model>_<actuator>_<init>_s<seed>.fit.json)");
  return [f](int argc, char** argv) { return run(*f, argc, argv); };
}

}  // namespace diffnea::cli
