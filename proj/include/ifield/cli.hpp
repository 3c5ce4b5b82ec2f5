#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "ifield/field_core.hpp"

namespace ifield::cli {

using Json = nlohmann::ordered_json;

enum class Format { Csv, Json, Both };

// One disguise primitive; params hold its numeric parameters by name.
struct DisguiseStep {
  std::string type;  // translation, rotation, shear, radial_stretch, wobble
  Json params;
};

struct RunConfig {
  std::string command;
  ModelSpec model;
  std::vector<DisguiseStep> disguise;
  Json params = Json::object();  // command parameters with defaults filled
  std::string out_dir = "out";
  Format format = Format::Both;
  std::uint64_t seed = 0;
  int threads = 1;

  Json effective() const;  // the full validated tree, defaults included
};

const std::vector<std::string>& commands();

// Parses and validates a JSON document. Unknown keys raise SchemaError with
// the key path as context.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_tree(const Json& doc);

// The model composed with its disguise.
IntegrableSystem build_system(const RunConfig& cfg);
DiffeoPtr build_disguise(const RunConfig& cfg);

struct Table {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ResidualEntry {
  std::string name;
  double value = 0.0;
  double tol = 0.0;  // 0: reported only
  bool pass() const { return tol <= 0.0 || value < tol; }
};

struct RunReport {
  std::string command;
  double wall_time = 0.0;
  std::vector<ResidualEntry> residuals;
  std::vector<Table> tables;
  Json meta = Json::object();  // accepted radii, classification, profiles
  std::vector<std::string> files;
  int exit_status = 0;

  bool accepted() const;
};

RunReport run(const RunConfig& cfg);

// Writes tables, report and effective config into cfg.out_dir, each file
// atomically (temp + rename), and fills report.files.
void write_outputs(const RunConfig& cfg, RunReport& report);

// Machine-readable error document {code, message, module, context}.
Json error_json(const Error& e);
int exit_code(ErrorKind kind);

// %.17e formatting used for every CSV number.
std::string format_double(double v);
void write_atomic(const std::string& path, const std::string& content);

}  // namespace ifield::cli
