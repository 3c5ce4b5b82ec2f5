#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ifield/cli.hpp"

namespace ifield::cli {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IOError, "cli", "cannot open file for writing", tmp);
    f << content;
    f.flush();
    if (!f) throw Error(ErrorCode::IOError, "cli", "write failed", tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IOError, "cli", "rename failed: " + ec.message(), path);
}

namespace {

std::string csv(const Table& t) {
  std::ostringstream s;
  for (std::size_t i = 0; i < t.columns.size(); ++i) s << (i ? "," : "") << t.columns[i];
  s << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s << (i ? "," : "") << format_double(row[i]);
    s << '\n';
  }
  return s.str();
}

std::string residual_csv(const std::vector<ResidualEntry>& rs) {
  std::ostringstream s;
  s << "name,value,tol,pass\n";
  for (const auto& e : rs) s << e.name << ',' << format_double(e.value) << ',' << format_double(e.tol) << ','
                             << (e.pass() ? 1 : 0) << '\n';
  return s.str();
}

Json table_json(const Table& t) { return Json{{"columns", t.columns}, {"rows", t.rows}}; }

}  // namespace

void write_outputs(const RunConfig& cfg, RunReport& report) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorCode::IOError, "cli", "cannot create output directory: " + ec.message(), cfg.out_dir);
  auto path = [&](const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); };
  report.files.clear();
  auto emit = [&](const std::string& name, const std::string& content) {
    write_atomic(path(name), content);
    report.files.push_back(name);
  };
  emit("effective_config.json", cfg.effective().dump(2) + "\n");
  const bool want_csv = cfg.format != Format::Json, want_json = cfg.format != Format::Csv;
  if (want_csv) {
    for (const auto& t : report.tables) emit(t.name + ".csv", csv(t));
    emit("residuals.csv", residual_csv(report.residuals));
  }
  if (want_json) {
    Json res = Json::array();
    for (const auto& e : report.residuals)
      res.push_back(Json{{"name", e.name}, {"value", e.value}, {"tol", e.tol}, {"pass", e.pass()}});
    Json doc{{"command", report.command}, {"exit_status", report.exit_status}, {"accepted", report.accepted()},
             {"residuals", res},          {"meta", report.meta}};
    if (!want_csv) {
      Json tables = Json::object();
      for (const auto& t : report.tables) tables[t.name] = table_json(t);
      doc["tables"] = tables;
    }
    report.files.push_back("report.json");
    doc["files"] = report.files;
    write_atomic(path("report.json"), doc.dump(2) + "\n");
  }
}

Json error_json(const Error& e) {
  return Json{{"code", to_string(e.code())}, {"message", e.what()}, {"module", e.module()}, {"context", e.context()}};
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Numerical: return 3;
    case ErrorKind::Invariant: return 4;
  }
  return 4;
}

}  // namespace ifield::cli
