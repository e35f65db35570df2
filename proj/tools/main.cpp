#include <exception>
#include <iostream>

#include <fmt/format.h>

#include "common.hpp"
#include "diffnea/errors.hpp"

using namespace diffnea;
using namespace diffnea::cli;

int main(int argc, char** argv) {
  CLI::App app{"Differentiable Newton-Euler identification benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "diffnea 0.1.0");
  app.footer("Environment: DIFFNEA_OUT sets the default output directory.");

  std::vector<std::pair<CLI::App*, Handler>> commands;
  auto add = [&](const char* name, const char* help, Handler (*reg)(CLI::App&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    commands.emplace_back(sub, reg(*sub));
  };
  add("generate", "Simulate a uniform or trajectory dataset", register_generate);
  add("train", "Fit one model to a dataset", register_train);
  add("rollout", "Zero-torque rollout of a fitted model against the plant", register_rollout);
  add("eval", "Roll out every fit in a directory and aggregate the results", register_eval);
  add("gradcheck", "Compare reverse-mode gradients with finite differences", register_gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (auto& [sub, handler] : commands) {
      if (sub->parsed()) return handler(argc, argv);
    }
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    // Config validation (step sizes, fractions, unknown names).
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitIo;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "malformed JSON: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
