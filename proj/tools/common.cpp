#include "common.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "diffnea/errors.hpp"

namespace diffnea::cli {

namespace fs = std::filesystem;

fs::path output_dir() {
  const char* env = std::getenv("DIFFNEA_OUT");
  if (env != nullptr && *env != '\0') return fs::path(env);
  return fs::current_path();
}

fs::path resolve_output(const std::string& explicit_path, const std::string& fallback_name) {
  fs::path out = explicit_path.empty() ? output_dir() / fallback_name : fs::path(explicit_path);
  if (out.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + out.parent_path().string() + ": " + ec.message());
  }
  return out;
}

static std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ConfigFile ConfigFile::load(const std::string& path) {
  ConfigFile cfg;
  if (path.empty()) return cfg;
  cfg.path = path;
  const std::string text = read_file(cfg.path);
  try {
    cfg.doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, path + ": " + e.what());
  }
  if (!cfg.doc.is_object()) throw SchemaError("", path + ": config must be a JSON object");
  return cfg;
}

nlohmann::json ConfigFile::section(const std::string& key) const {
  if (!doc.contains(key)) return nlohmann::json::object();
  const auto& s = doc.at(key);
  if (!s.is_object()) throw SchemaError("", "config section '" + key + "' must be an object");
  return s;
}

std::string artifact_id(const fs::path& path) {
  const std::string body = read_file(path);
  const std::string header = "blob " + std::to_string(body.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, body.data(), body.size()) == 1 && EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string iso_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Manifest::Manifest(std::string command, int argc, char** argv)
    : command_(std::move(command)),
      argv_(argv, argv + argc),
      started_(std::chrono::system_clock::now()),
      clock_(std::chrono::steady_clock::now()) {}

void Manifest::set_config(const ConfigFile& cfg) {
  if (cfg.path.empty()) return;
  config_ = {{"path", cfg.path.string()}, {"id", artifact_id(cfg.path)}};
}

void Manifest::add_input(const fs::path& path) {
  inputs_.push_back({{"path", path.string()}, {"id", artifact_id(path)}});
}

void Manifest::add_artifact(const fs::path& path) {
  artifacts_.push_back({{"path", path.string()}, {"id", artifact_id(path)}});
}

fs::path Manifest::write(const fs::path& path) const {
  const auto finished = std::chrono::system_clock::now();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();
  nlohmann::ordered_json doc;
  doc["command"] = command_;
  doc["argv"] = argv_;
  doc["config"] = config_;
  doc["effective_config"] = effective_;
  doc["inputs"] = inputs_;
  doc["artifacts"] = artifacts_;
  for (const auto& [k, v] : extra_.items()) doc[k] = v;
  doc["started"] = iso_timestamp(started_);
  doc["finished"] = iso_timestamp(finished);
  doc["wall_seconds"] = wall;
  write_text(path, doc.dump(2) + "\n");
  return path;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError(flag + ": '" + item + "' is not a number");
    }
    if (used != item.size()) throw UsageError(flag + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> out;
  for (double v : parse_list(text, flag)) {
    if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw UsageError(flag + ": expected positive integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string energy_class(const nlohmann::json& train_config) {
  const std::string model = train_config.value("model", "diffnea");
  if (model == "ffnn") return "unbounded";
  if (model == "nea") return "conserving";
  const std::string act = train_config.contains("actuator") ? train_config["actuator"].value("kind", "none") : "none";
  if (act == "none") return "conserving";
  if (act == "viscous" || act == "stribeck" || act == "nn_friction") return "bounded";
  return "unbounded";
}

}  // namespace diffnea::cli
