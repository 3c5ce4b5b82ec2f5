#include <algorithm>
#include <cmath>
#include <map>

#include "ifield/cli.hpp"

namespace ifield::cli {

namespace {

constexpr const char* kModule = "cli";

[[noreturn]] void schema_error(const std::string& message, const std::string& path) {
  throw Error(ErrorCode::SchemaError, kModule, message, path);
}

Json near_axis_defaults() {
  return Json{{"guess", Json::array()}, {"r_max", 0.4},        {"n_r", 24},
              {"n_theta", 32},          {"n_phi", 32},         {"n_flux", 40},
              {"n_axis", 64},           {"r_verify", 0.05},    {"route", "two_form"},
              {"verify_trajectories", 12}, {"ode_tol", 1e-12}, {"tol", 1e-6},
              {"drift_tol", 1e-8}};
}

Json chart_defaults() {
  return Json{{"psi", {0.01, 0.02, 0.03, 0.04}}, {"levels", Json::array()}, {"guess", Json::array()},
              {"n_theta", 32}, {"n_zeta", 32}, {"tol", 1e-6}};
}

const std::map<std::string, Json>& defaults() {
  static const std::map<std::string, Json> d = {
      {"verify", Json{{"samples", 500}, {"radius", 0.3}, {"tol", 1e-10}}},
      {"find-axis", Json{{"guess", Json::array()}, {"n_samples", 64}, {"tol", 1e-11}}},
      {"classify-axis", Json{{"guess", Json::array()}, {"tol", 1e-8}}},
      {"trace", Json{{"start", {0.1, 0.0, 0.0}}, {"turns", 10.0}, {"n_out", 200}, {"tol", 1e-12}}},
      {"poincare", Json{{"seeds", Json::array({{0.05, 0.0}, {0.1, 0.0}, {0.2, 0.0}})}, {"transits", 200}, {"tol", 1e-12}}},
      {"flux-profile", Json{{"psi", {0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04}},
                            {"levels", Json::array()},
                            {"guess", Json::array()},
                            {"method", "spline"}}},
      {"hamada", chart_defaults()},
      {"boozer", chart_defaults()},
      {"near-axis-normal-form", near_axis_defaults()},
      {"near-axis-hamada", near_axis_defaults()},
      {"near-axis-boozer", near_axis_defaults()},
      {"embed-check", Json{{"samples", 200}, {"radius", 0.3}, {"eta", "dphi"}, {"tol", 1e-9}, {"closure_tol", 1e-7}}},
  };
  return d;
}

const std::map<std::string, std::vector<std::string>>& disguise_keys() {
  static const std::map<std::string, std::vector<std::string>> d = {
      {"translation", {"tx", "ty"}}, {"rotation", {"m", "theta0"}},      {"shear", {"s0", "eps", "n"}},
      {"radial_stretch", {"eps"}},   {"wobble", {"amplitude"}},
  };
  return d;
}

bool same_kind(const Json& def, const Json& v) {
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_array()) return v.is_array();
  return def.type() == v.type();
}

void check_keys(const Json& obj, const std::vector<std::string>& allowed, const std::string& path) {
  if (!obj.is_object()) schema_error("expected an object", path);
  for (const auto& [k, v] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      schema_error("unknown key '" + k + "'", path.empty() ? k : path + "." + k);
  }
}

double number(const Json& obj, const char* key, double def, const std::string& path) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number()) schema_error("expected a number", path + "." + key);
  return obj[key].get<double>();
}

void check_numbers(const Json& arr, const std::string& path, std::size_t width = 0) {
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (width > 0) {
      if (!arr[i].is_array() || arr[i].size() != width) schema_error("expected a list of " + std::to_string(width), p);
      check_numbers(arr[i], p);
    } else if (!arr[i].is_number()) {
      schema_error("expected a number", p);
    }
  }
}

void validate_params(const std::string& command, const Json& p) {
  const std::string base = "params";
  for (const auto& [k, v] : p.items()) {
    const std::string path = base + "." + k;
    if (k.find("tol") != std::string::npos && !(v.get<double>() > 0.0))
      throw Error(ErrorCode::ParameterOutOfRange, kModule, "tolerances must be positive", path);
    if (v.is_number_integer() && v.get<long long>() < (k == "verify_trajectories" ? 0 : 1))
      throw Error(ErrorCode::ParameterOutOfRange, kModule, "count out of range", path);
    if (v.is_number_float() && !std::isfinite(v.get<double>()))
      throw Error(ErrorCode::ParameterOutOfRange, kModule, "non-finite value", path);
  }
  for (const char* k : {"radius", "r_max", "r_verify", "turns"})
    if (p.contains(k) && !(p[k].get<double>() > 0.0))
      throw Error(ErrorCode::ParameterOutOfRange, kModule, "must be positive", base + "." + k);
  for (const char* k : {"psi", "levels"})
    if (p.contains(k)) check_numbers(p[k], base + "." + k);
  if (p.contains("psi"))
    for (const auto& v : p["psi"])
      if (!(v.get<double>() > 0.0))
        throw Error(ErrorCode::ParameterOutOfRange, kModule, "flux labels must be positive", base + ".psi");
  if (p.contains("guess")) {
    check_numbers(p["guess"], base + ".guess");
    if (!p["guess"].empty() && p["guess"].size() != 2) schema_error("guess is [x, y] or empty", base + ".guess");
  }
  if (p.contains("start")) {
    check_numbers(p["start"], base + ".start");
    if (p["start"].size() != 3) schema_error("start is [x, y, phi]", base + ".start");
  }
  if (p.contains("seeds")) check_numbers(p["seeds"], base + ".seeds", 2);
  if (p.contains("method") && p["method"] != "spline" && p["method"] != "loop")
    schema_error("method is 'spline' or 'loop'", base + ".method");
  if (p.contains("route") && p["route"] != "two_form" && p["route"] != "sigma")
    schema_error("route is 'two_form' or 'sigma'", base + ".route");
  if (p.contains("eta") && p["eta"] != "dphi" && p["eta"] != "bflat")
    schema_error("eta is 'dphi' or 'bflat'", base + ".eta");
  if ((command == "hamada" || command == "boozer" || command == "flux-profile") && p["psi"].empty() &&
      p["levels"].empty())
    throw Error(ErrorCode::EmptySampleSet, kModule, "no surfaces requested", base + ".psi");
}

ModelSpec parse_system(const Json& s, std::vector<DisguiseStep>& disguise) {
  check_keys(s, {"model", "iota0", "iota2", "a0", "rho_eps", "p0", "k", "disguise"}, "system");
  if (!s.contains("model") || !s["model"].is_string()) schema_error("model name required", "system.model");
  ModelSpec m;
  m.kind = parse_model_kind(s["model"].get<std::string>());
  m.iota0 = number(s, "iota0", m.iota0, "system");
  m.iota2 = number(s, "iota2", m.iota2, "system");
  m.a0 = number(s, "a0", m.a0, "system");
  m.rho_eps = number(s, "rho_eps", m.rho_eps, "system");
  m.p0 = number(s, "p0", m.p0, "system");
  m.k = number(s, "k", m.k, "system");
  for (double v : {m.iota0, m.iota2, m.a0, m.rho_eps, m.p0, m.k})
    if (!std::isfinite(v)) throw Error(ErrorCode::ParameterOutOfRange, kModule, "non-finite model parameter", "system");
  if ((m.kind == ModelKind::A || m.kind == ModelKind::A_MHS) &&
      std::abs(std::abs(2.0 * std::cos(kTwoPi * m.iota0)) - 2.0) < 1e-6)
    throw Error(ErrorCode::ParameterOutOfRange, kModule, "parabolic axis: |2 cos(2 pi iota0)| = 2", "system.iota0");
  if (!(std::abs(m.rho_eps) < 1.0))
    throw Error(ErrorCode::ParameterOutOfRange, kModule, "rho_eps must satisfy |rho_eps| < 1", "system.rho_eps");
  if (s.contains("disguise")) {
    if (!s["disguise"].is_array()) schema_error("expected a list of steps", "system.disguise");
    for (std::size_t i = 0; i < s["disguise"].size(); ++i) {
      const Json& st = s["disguise"][i];
      const std::string path = "system.disguise[" + std::to_string(i) + "]";
      if (!st.is_object() || !st.contains("type") || !st["type"].is_string()) schema_error("step needs a type", path);
      const std::string type = st["type"].get<std::string>();
      auto it = disguise_keys().find(type);
      if (it == disguise_keys().end()) schema_error("unknown disguise '" + type + "'", path + ".type");
      std::vector<std::string> allowed = it->second;
      allowed.push_back("type");
      check_keys(st, allowed, path);
      DisguiseStep d{type, Json::object()};
      for (const auto& k : it->second) {
        if (!st.contains(k)) schema_error("missing parameter", path + "." + k);
        if (!st[k].is_number()) schema_error("expected a number", path + "." + k);
        d.params[k] = st[k];
      }
      if ((type == "rotation" && !st["m"].is_number_integer()) || (type == "shear" && !st["n"].is_number_integer()))
        schema_error("expected an integer", path);
      disguise.push_back(std::move(d));
    }
  }
  return m;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : defaults()) v.push_back(k);
    return v;
  }();
  return c;
}

RunConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    schema_error(std::string("malformed document: ") + e.what(), "");
  }
  return parse_config_tree(doc);
}

RunConfig parse_config_tree(const Json& doc) {
  check_keys(doc, {"command", "system", "params", "output", "seed", "threads"}, "");
  RunConfig cfg;
  if (!doc.contains("command") || !doc["command"].is_string()) schema_error("command required", "command");
  cfg.command = doc["command"].get<std::string>();
  auto def = defaults().find(cfg.command);
  if (def == defaults().end()) schema_error("unknown command '" + cfg.command + "'", "command");
  if (!doc.contains("system")) schema_error("system required", "system");
  cfg.model = parse_system(doc["system"], cfg.disguise);

  cfg.params = def->second;
  if (doc.contains("params")) {
    const Json& p = doc["params"];
    if (!p.is_object()) schema_error("expected an object", "params");
    for (const auto& [k, v] : p.items()) {
      if (!cfg.params.contains(k)) schema_error("unknown key '" + k + "'", "params." + k);
      if (!same_kind(cfg.params[k], v)) schema_error("wrong type", "params." + k);
      cfg.params[k] = v;
    }
  }
  validate_params(cfg.command, cfg.params);

  if (doc.contains("output")) {
    const Json& o = doc["output"];
    check_keys(o, {"dir", "format"}, "output");
    if (o.contains("dir")) {
      if (!o["dir"].is_string()) schema_error("expected a string", "output.dir");
      cfg.out_dir = o["dir"].get<std::string>();
    }
    if (o.contains("format")) {
      const std::string f = o["format"].is_string() ? o["format"].get<std::string>() : "";
      if (f == "csv") cfg.format = Format::Csv;
      else if (f == "json") cfg.format = Format::Json;
      else if (f == "both") cfg.format = Format::Both;
      else schema_error("format is csv, json or both", "output.format");
    }
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) schema_error("expected a non-negative integer", "seed");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("threads")) {
    if (!doc["threads"].is_number_integer() || doc["threads"].get<int>() < 1)
      throw Error(ErrorCode::ParameterOutOfRange, kModule, "threads must be >= 1", "threads");
    cfg.threads = doc["threads"].get<int>();
  }
  return cfg;
}

Json RunConfig::effective() const {
  Json sys{{"model", model_name(model.kind)}, {"iota0", model.iota0}, {"iota2", model.iota2}, {"a0", model.a0},
           {"rho_eps", model.rho_eps},       {"p0", model.p0},       {"k", model.k}};
  Json d = Json::array();
  for (const auto& s : disguise) {
    Json st{{"type", s.type}};
    for (const auto& [k, v] : s.params.items()) st[k] = v;
    d.push_back(st);
  }
  sys["disguise"] = d;
  const char* fmt = format == Format::Csv ? "csv" : format == Format::Json ? "json" : "both";
  return Json{{"command", command}, {"system", sys},  {"params", params}, {"output", {{"dir", out_dir}, {"format", fmt}}},
              {"seed", seed},       {"threads", threads}};
}

DiffeoPtr build_disguise(const RunConfig& cfg) {
  std::vector<DiffeoPtr> maps;
  for (const auto& s : cfg.disguise) {
    const Json& p = s.params;
    if (s.type == "translation") maps.push_back(make_translation(p["tx"].get<double>(), p["ty"].get<double>()));
    else if (s.type == "rotation") maps.push_back(make_rotation(p["m"].get<int>(), p["theta0"].get<double>()));
    else if (s.type == "shear")
      maps.push_back(make_shear(p["s0"].get<double>(), p["eps"].get<double>(), p["n"].get<int>()));
    else if (s.type == "radial_stretch") maps.push_back(make_radial_stretch(p["eps"].get<double>()));
    else if (s.type == "wobble") maps.push_back(make_wobble(p["amplitude"].get<double>()));
  }
  if (maps.empty()) return make_identity();
  return compose(std::move(maps));
}

IntegrableSystem build_system(const RunConfig& cfg) {
  IntegrableSystem sys = make_model(cfg.model);
  if (cfg.disguise.empty()) return sys;
  return pushforward(sys, build_disguise(cfg));
}

}  // namespace ifield::cli
