#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ifield/cli.hpp"

using namespace ifield;
using namespace ifield::cli;

namespace {

// Prints the error document and, when an output directory is known, stores it as error.json.
int fail(const Error& e, const std::string& out_dir) {
  const std::string doc = error_json(e).dump(2);
  std::cerr << doc << "\n";
  if (!out_dir.empty()) {
    try {
      std::filesystem::create_directories(out_dir);
      write_atomic((std::filesystem::path(out_dir) / "error.json").string(), doc + "\n");
    } catch (...) {
    }
  }
  return exit_code(e.kind());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::SchemaError, "cli", "cannot read config file", path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integrable magnetic field toolkit"};
  std::string config_path, out_dir, format, command;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("command", command, "command (overrides the config's command)");
  app.add_option("--config", config_path, "run configuration (JSON)")->required();
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed for sample sets");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", format, "output formats")->check(CLI::IsMember({"csv", "json", "both"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  RunConfig cfg;
  try {
    Json doc;
    try {
      doc = Json::parse(read_file(config_path));
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::SchemaError, "cli", std::string("malformed document: ") + e.what(), config_path);
    }
    if (!doc.is_object()) throw Error(ErrorCode::SchemaError, "cli", "expected an object", "");
    if (!command.empty()) doc["command"] = command;
    if (!out_dir.empty()) doc["output"]["dir"] = out_dir;
    if (!format.empty()) doc["output"]["format"] = format;
    if (*seed_opt) doc["seed"] = seed;
    if (threads > 0) doc["threads"] = threads;
    cfg = parse_config_tree(doc);
  } catch (const Error& e) {
    return fail(e, out_dir);
  }

  try {
    RunReport report = run(cfg);
    write_outputs(cfg, report);
    std::printf("%s: %s in %.2f s, %zu files in %s\n", cfg.command.c_str(), report.accepted() ? "accepted" : "REJECTED",
                report.wall_time, report.files.size(), cfg.out_dir.c_str());
    if (!report.accepted()) {
      std::string failed;
      for (const auto& r : report.residuals)
        if (!r.pass()) failed += (failed.empty() ? "" : ",") + r.name + "=" + format_double(r.value);
      return fail(Error(ErrorCode::ResidualAboveTolerance, "cli", "residuals above tolerance", failed), cfg.out_dir);
    }
    return 0;
  } catch (const Error& e) {
    return fail(e, cfg.out_dir);
  } catch (const std::exception& e) {
    return fail(Error(ErrorCode::InvariantViolation, "cli", e.what()), cfg.out_dir);
  }
}
