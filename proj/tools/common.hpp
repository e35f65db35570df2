#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace diffnea::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

/// Bad flag or config value; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Default output directory: $DIFFNEA_OUT, else the working directory.
std::filesystem::path output_dir();
/// `explicit_path` if given, else output_dir() / fallback_name; parent
/// directories are created.
std::filesystem::path resolve_output(const std::string& explicit_path, const std::string& fallback_name);

/// Parsed --config file (an empty object when no file was given).
struct ConfigFile {
  std::filesystem::path path;
  nlohmann::json doc = nlohmann::json::object();

  static ConfigFile load(const std::string& path);
  /// doc[key] or an empty object.
  nlohmann::json section(const std::string& key) const;
};

/// Git blob id (SHA-1 of "blob <size>\0" + bytes) of a file.
std::string artifact_id(const std::filesystem::path& path);
std::string iso_timestamp(std::chrono::system_clock::time_point t);

/// Provenance record written next to a command's main artifact.
class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv);

  void set_config(const ConfigFile& cfg);
  void set_effective_config(nlohmann::json cfg) { effective_ = std::move(cfg); }
  void add_input(const std::filesystem::path& path);
  void add_artifact(const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  /// Writes `<path>` and returns it.
  std::filesystem::path write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json config_ = nullptr;
  nlohmann::json effective_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json artifacts_ = nlohmann::json::array();
  nlohmann::json extra_ = nlohmann::json::object();
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point clock_;
};

/// "a,b,c" -> numbers; throws UsageError.
std::vector<double> parse_list(const std::string& text, const std::string& flag);
std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& flag);

/// True when the option was given on the command line.
inline bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Energy class of a fitted model: conserving, bounded or unbounded.
std::string energy_class(const nlohmann::json& train_config);

// Subcommands. Each registers its flags and returns the handler to run
// after parsing.
using Handler = std::function<int(int argc, char** argv)>;
Handler register_generate(CLI::App& app);
Handler register_train(CLI::App& app);
Handler register_rollout(CLI::App& app);
Handler register_eval(CLI::App& app);
Handler register_gradcheck(CLI::App& app);

}  // namespace diffnea::cli
