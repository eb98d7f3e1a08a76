#pragma once

// Job files in, JSON reports out. A job names a pipeline, the space, the
// target (map, word or matrix list) and optional params; the report echoes
// the effective config inside its provenance so it can be replayed.
//
// Exit codes: 0 completed (any verdict), 2 config error, 3 numerical failure.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "koopman_gate/certify.hpp"
#include "koopman_gate/io/json.hpp"

namespace kgate::cli {

using io::ConfigError;
using io::json;

inline constexpr const char* kSchema = "v1";
inline constexpr const char* kTool = "koopman-gate";
inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Command-line values that take precedence over the job's params.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> r_max;
  std::optional<int> n_max;
  std::optional<std::string> tolerance_profile;
};

struct Outcome {
  int exit_code = kExitOk;
  /// The report (exit 0) or an error object (otherwise).
  json report;
};

// ---------------------------------------------------------------- logging

inline bool log_enabled() {
  const char* v = std::getenv("KOOPMAN_GATE_LOG");
  return v && *v && std::string_view(v) != "0";
}

inline void log(const std::string& msg) {
  if (log_enabled()) std::cerr << "[koopman-gate] " << msg << "\n";
}

// ---------------------------------------------------------------- hashing

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical dump (object keys sorted) of the effective config.
inline std::string config_hash(const json& effective) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(effective.dump())));
  return buf;
}

// ---------------------------------------------------------------- params

inline const std::vector<std::string>& pipelines() {
  static const std::vector<std::string> p = {"theorem1",     "affine1d",       "polyaut2d",
                                             "span_check",   "finite_section", "monomial_witness"};
  return p;
}

inline Tolerances tolerances_from_json(const json& t, Tolerances base, const std::string& path) {
  if (!t.is_object()) throw ConfigError(path, "expected an object");
  const double eps = std::numeric_limits<double>::epsilon();
  for (auto it = t.begin(); it != t.end(); ++it) {
    const std::string p = io::child(path, it.key());
    double v = io::read_double(it.value(), p);
    if (v < eps) throw ConfigError(p, "tolerance must be >= machine epsilon");
    if (it.key() == "fixed_point") base.fixed_point = v;
    else if (it.key() == "stability_band") base.stability_band = v;
    else if (it.key() == "rank_relative") base.rank_relative = v;
    else if (it.key() == "root_cluster") base.root_cluster = v;
    else if (it.key() == "orbit_dedup") base.orbit_dedup = v;
    else if (it.key() == "newton_residual") base.newton_residual = v;
    else if (it.key() == "relation") base.relation = v;
    else if (it.key() == "leakage") base.leakage = v;
    else throw ConfigError(p, "unknown tolerance");
  }
  return base;
}

/// The job with every param made explicit (defaults and overrides applied).
inline json effective_config(const json& job, const Overrides& ov = {}) {
  if (!job.is_object()) throw ConfigError("", "job must be a JSON object");
  json eff = job;
  const std::string pipe = io::read_string(io::require_key(job, "pipeline", ""), "/pipeline");
  if (std::find(pipelines().begin(), pipelines().end(), pipe) == pipelines().end())
    throw ConfigError("/pipeline", "unknown pipeline '" + pipe + "'");
  if (job.contains("schema") && job["schema"] != kSchema)
    throw ConfigError("/schema", "unsupported schema (expected \"v1\")");

  json params = job.contains("params") ? job["params"] : json::object();
  if (!params.is_object()) throw ConfigError("/params", "expected an object");
  for (auto it = params.begin(); it != params.end(); ++it) {
    static const std::vector<std::string> known = {"r_max", "n_max", "seed", "tolerance_profile",
                                                   "tolerances", "starts", "norm_trace"};
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("/params/" + it.key(), "unknown parameter");
  }
  CertifyOptions d;
  int r_max = params.contains("r_max") ? io::read_int(params["r_max"], "/params/r_max") : d.r_max;
  int n_max = params.contains("n_max") ? io::read_int(params["n_max"], "/params/n_max") : d.n_max;
  std::uint64_t seed = d.seed;
  if (params.contains("seed")) {
    if (!params["seed"].is_number_unsigned() && !(params["seed"].is_number_integer() && params["seed"].get<long long>() >= 0))
      throw ConfigError("/params/seed", "expected a non-negative integer");
    seed = params["seed"].get<std::uint64_t>();
  }
  std::string profile =
      params.contains("tolerance_profile") ? io::read_string(params["tolerance_profile"], "/params/tolerance_profile") : "default";
  int starts = params.contains("starts") ? io::read_int(params["starts"], "/params/starts") : d.saddle_starts;
  bool trace = params.contains("norm_trace") ? io::read_bool(params["norm_trace"], "/params/norm_trace") : d.norm_trace;

  if (ov.seed) seed = *ov.seed;
  if (ov.r_max) r_max = *ov.r_max;
  if (ov.n_max) n_max = *ov.n_max;
  if (ov.tolerance_profile) profile = *ov.tolerance_profile;

  if (r_max < 1 || r_max > 12) throw ConfigError("/params/r_max", "must be in [1, 12]");
  if (n_max < 1 || n_max > 16) throw ConfigError("/params/n_max", "must be in [1, 16]");
  if (starts < 1 || starts > 1000000) throw ConfigError("/params/starts", "must be in [1, 1000000]");
  Tolerances tol;
  if (profile == "strict") tol = Tolerances::strict();
  else if (profile != "default") throw ConfigError("/params/tolerance_profile", "expected 'default' or 'strict'");
  if (params.contains("tolerances")) tol = tolerances_from_json(params["tolerances"], tol, "/params/tolerances");

  eff["params"] = {{"r_max", r_max},       {"n_max", n_max},        {"seed", seed}, {"tolerance_profile", profile},
                   {"tolerances", io::to_json(tol)}, {"starts", starts}, {"norm_trace", trace}};
  eff["schema"] = kSchema;
  return eff;
}

inline CertifyOptions options_from(const json& eff) {
  const json& p = eff["params"];
  CertifyOptions o;
  o.r_max = p["r_max"].get<int>();
  o.n_max = p["n_max"].get<int>();
  o.seed = p["seed"].get<std::uint64_t>();
  o.tol = tolerances_from_json(p["tolerances"], Tolerances{}, "/params/tolerances");
  o.saddle_starts = p["starts"].get<int>();
  o.norm_trace = p["norm_trace"].get<bool>();
  return o;
}

// ---------------------------------------------------------------- pipelines

namespace detail {

inline void require_dims(int got, int want, const std::string& path, const std::string& what) {
  if (got != want)
    throw ConfigError(path, what + " has dimension " + std::to_string(got) + ", expected " + std::to_string(want));
}

inline std::vector<CxMatrix> read_matrix_list(const json& j, const std::string& path) {
  std::vector<CxMatrix> out;
  for (std::size_t i = 0; i < io::read_array(j, path).size(); ++i) out.push_back(io::read_cmatrix(j[i], io::child(path, i)));
  return out;
}

/// {"points": [[...], ...]} or {"start": [...], "period": r}.
inline PeriodicOrbit read_orbit(const json& j, const PolyMap& f, const std::string& path) {
  PeriodicOrbit o;
  if (j.contains("points")) {
    const std::string pp = io::child(path, "points");
    for (std::size_t i = 0; i < io::read_array(j["points"], pp).size(); ++i) {
      o.points.push_back(io::read_cvector(j["points"][i], io::child(pp, i)));
      require_dims(static_cast<int>(o.points.back().size()), f.dim_in(), io::child(pp, i), "orbit point");
    }
    if (o.points.empty()) throw ConfigError(pp, "orbit needs at least one point");
  } else {
    CxVector z = io::read_cvector(io::require_key(j, "start", path), io::child(path, "start"));
    require_dims(static_cast<int>(z.size()), f.dim_in(), io::child(path, "start"), "orbit start");
    int r = j.contains("period") ? io::read_int(j["period"], io::child(path, "period")) : 1;
    if (r < 1 || r > 64) throw ConfigError(io::child(path, "period"), "must be in [1, 64]");
    for (int i = 0; i < r; ++i) {
      o.points.push_back(z);
      z = f(z);
    }
  }
  o.period = static_cast<int>(o.points.size());
  return o;
}

inline json run_pipeline(const json& eff, const CertifyOptions& opt) {
  const std::string pipe = eff["pipeline"].get<std::string>();
  auto space = [&] { return io::read_space(io::require_key(eff, "space", ""), "/space"); };
  auto map = [&] { return io::read_map(io::require_key(eff, "map", ""), "/map"); };

  if (pipe == "span_check") {
    auto mats = read_matrix_list(io::require_key(eff, "matrices", ""), "/matrices");
    if (mats.empty()) throw ConfigError("/matrices", "need at least one matrix");
    json r = io::to_json(span_check_2x2(mats, opt.tol.root_cluster));
    r["kind"] = "span";
    return r;
  }
  SpaceDescriptor s = space();
  const int d = space_dim(s);
  if (pipe == "polyaut2d") {
    require_dims(d, 2, "/space/dim", "space");
    AutWord w = io::read_word(io::require_key(eff, "word", ""), "/word");
    std::vector<CxMatrix> probe;
    if (eff.contains("probe")) probe = read_matrix_list(eff["probe"], "/probe");
    return io::to_json(polyaut_2d_certificate(s, w, probe, opt));
  }
  PolyMap f = map();
  require_dims(f.dim_in(), d, "/map", "map");
  if (pipe == "theorem1") {
    PeriodicOrbit o = read_orbit(io::require_key(eff, "orbit", ""), f, "/orbit");
    return io::to_json(theorem1_certificate(s, f, o, opt));
  }
  if (pipe == "affine1d") {
    require_dims(d, 1, "/space/dim", "space");
    return io::to_json(affine_only_1d(s, f, opt));
  }
  if (pipe == "finite_section") {
    CxVector p = io::read_cvector(io::require_key(eff, "point", ""), "/point");
    require_dims(static_cast<int>(p.size()), d, "/point", "point");
    int n = eff.contains("n") ? io::read_int(eff["n"], "/n") : opt.n_max;
    if (n < 0 || n > 24) throw ConfigError("/n", "must be in [0, 24]");
    if (!is_hilbert(s)) throw ConfigError("/space", "finite sections need a Hilbert space; use monomial_witness");
    json rows = json::array();
    bool monotone = true;
    double prev = 0.0;
    for (int k = 0; k <= n; ++k) {
      FiniteSectionNorm v = finite_section_norm(s, f, p, k, opt.tol);
      monotone = monotone && v.value >= prev * (1.0 - 1e-9);
      prev = v.value;
      rows.push_back({{"n", k}, {"value", v.value}, {"rank", v.rank}, {"rank_deficient", v.rank_deficient}});
    }
    return {{"kind", "table"}, {"table", "finite_section_norm"}, {"rows", rows}, {"monotone", monotone}};
  }
  // monomial_witness
  int N = eff.contains("N") ? io::read_int(eff["N"], "/N") : opt.n_max;
  if (N < 1 || N > 170) throw ConfigError("/N", "must be in [1, 170]");
  MonomialWitness w = monomial_ratio_witness(s, f, N);
  json rows = json::array();
  for (const auto& r : w.rows) rows.push_back({{"n", r.n}, {"ratio", r.ratio}});
  return {{"kind", "table"}, {"table", "monomial_ratio"}, {"rows", rows}, {"divergent", w.divergent}};
}

} // namespace detail

inline json error_object(int code, const std::string& message, const std::string& path = "") {
  return {{"schema", kSchema},
          {"tool", kTool},
          {"status", "error"},
          {"error", {{"code", code}, {"kind", code == kExitConfig ? "config" : "numerical"}, {"path", path}, {"message", message}}}};
}

/// Run one parsed job. Never throws; failures come back as error objects.
inline Outcome run_job(const json& job, const Overrides& ov = {}) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    json eff = effective_config(job, ov);
    CertifyOptions opt = options_from(eff);
    const std::string hash = config_hash(eff);
    opt.seed = eff["params"]["seed"].get<std::uint64_t>();
    json result = detail::run_pipeline(eff, opt);
    json prov = {{"config_hash", hash},
                 {"seed", opt.seed},
                 {"tolerances", io::to_json(opt.tol)},
                 {"tolerance_profile", eff["params"]["tolerance_profile"]},
                 {"r_max", opt.r_max},
                 {"n_max", opt.n_max},
                 {"tool_version", kToolVersion},
                 {"config", eff}};
    out.report = {{"schema", kSchema}, {"tool", kTool}, {"status", "ok"}, {"pipeline", eff["pipeline"]},
                  {"result", result},  {"provenance", prov}};
    log(eff["pipeline"].get<std::string>() + " " + hash + " done in " +
        std::to_string(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()) + " ms");
  } catch (const ConfigError& e) {
    out.exit_code = kExitConfig;
    out.report = error_object(kExitConfig, e.what(), e.path());
  } catch (const NumericalError& e) {
    out.exit_code = kExitNumerical;
    out.report = error_object(kExitNumerical, e.what());
  } catch (const Error& e) {
    // Domain and dimension errors come from inputs the schema cannot rule out.
    out.exit_code = kExitConfig;
    out.report = error_object(kExitConfig, e.what());
  } catch (const json::exception& e) {
    out.exit_code = kExitConfig;
    out.report = error_object(kExitConfig, e.what());
  } catch (const std::exception& e) {
    out.exit_code = kExitNumerical;
    out.report = error_object(kExitNumerical, e.what());
  }
  if (out.exit_code != kExitOk) log("job failed: " + out.report["error"]["message"].get<std::string>());
  return out;
}

inline Outcome run_text(const std::string& text, const Overrides& ov = {}) {
  json job;
  try {
    job = json::parse(text);
  } catch (const json::parse_error& e) {
    return {kExitConfig, error_object(kExitConfig, std::string("malformed JSON: ") + e.what())};
  }
  return run_job(job, ov);
}

/// One report per non-empty line, order preserved; failures stay per line.
inline std::vector<Outcome> run_batch(const std::vector<std::string>& lines, const Overrides& ov = {}, int jobs = 1) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (lines[i].find_first_not_of(" \t\r") != std::string::npos) idx.push_back(i);
  std::vector<Outcome> out(idx.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < idx.size();) {
      out[k] = run_text(lines[idx[k]], ov);
      if (out[k].exit_code != kExitOk) out[k].report["line"] = idx[k] + 1;
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(idx.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

// ---------------------------------------------------------------- schema check

/// Structural check of a report against schema v1; returns the problems found.
inline std::vector<std::string> validate_report(const json& r) {
  std::vector<std::string> bad;
  auto need = [&](const json& j, const std::string& key, auto pred, const std::string& path) -> const json* {
    if (!j.is_object() || !j.contains(key)) {
      bad.push_back(path + "/" + key + ": missing");
      return nullptr;
    }
    if (!pred(j[key])) {
      bad.push_back(path + "/" + key + ": wrong type or value");
      return nullptr;
    }
    return &j[key];
  };
  auto is_str = [](const json& j) { return j.is_string(); };
  auto is_obj = [](const json& j) { return j.is_object(); };
  auto is_arr = [](const json& j) { return j.is_array(); };
  auto is_num = [](const json& j) { return j.is_number(); };
  auto is_int = [](const json& j) { return j.is_number_integer(); };
  auto is_bool = [](const json& j) { return j.is_boolean(); };
  auto is_cx = [](const json& j) { return j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(); };
  auto one_of = [](std::vector<std::string> v) {
    return [v](const json& j) { return j.is_string() && std::find(v.begin(), v.end(), j.get<std::string>()) != v.end(); };
  };

  need(r, "schema", [](const json& j) { return j == kSchema; }, "");
  const json* status = need(r, "status", one_of({"ok", "error"}), "");
  if (!status) return bad;
  if (*status == "error") {
    if (const json* e = need(r, "error", is_obj, "")) {
      need(*e, "code", [](const json& j) { return j == kExitConfig || j == kExitNumerical; }, "/error");
      need(*e, "message", is_str, "/error");
    }
    return bad;
  }
  need(r, "pipeline", one_of(pipelines()), "");
  if (const json* p = need(r, "provenance", is_obj, "")) {
    const json* h = need(*p, "config_hash", is_str, "/provenance");
    need(*p, "seed", [](const json& j) { return j.is_number_unsigned() || j.is_number_integer(); }, "/provenance");
    if (const json* t = need(*p, "tolerances", is_obj, "/provenance"))
      for (const char* k : {"fixed_point", "stability_band", "rank_relative", "root_cluster", "orbit_dedup",
                            "newton_residual", "relation", "leakage"})
        need(*t, k, is_num, "/provenance/tolerances");
    need(*p, "r_max", is_int, "/provenance");
    need(*p, "n_max", is_int, "/provenance");
    const json* c = need(*p, "config", is_obj, "/provenance");
    if (h && c) {
      static const std::regex re("^fnv1a64:[0-9a-f]{16}$");
      if (!std::regex_match(h->get<std::string>(), re)) bad.push_back("/provenance/config_hash: bad format");
      else if (*h != config_hash(*c)) bad.push_back("/provenance/config_hash: does not match the embedded config");
    }
  }
  const json* res = need(r, "result", is_obj, "");
  if (!res) return bad;
  const json* kind = need(*res, "kind", one_of({"certificate", "span", "table"}), "/result");
  if (!kind) return bad;
  if (*kind == "certificate") {
    const json* v = need(*res, "verdict", one_of({"unbounded", "no-obstruction", "inconclusive"}), "/result");
    need(*res, "theorem", one_of({"theorem1", "affine1d", "polyaut2d"}), "/result");
    need(*res, "reason", is_str, "/result");
    need(*res, "scope", is_str, "/result");
    need(*res, "norm_trace", is_arr, "/result");
    const json* c2 = need(*res, "condition2", is_obj, "/result");
    if (c2) {
      need(*c2, "kind", one_of({"injective-structural", "injective-numerical", "unknown"}), "/result/condition2");
      need(*c2, "probed", is_arr, "/result/condition2");
    }
    const json* w = need(*res, "witness", [](const json& j) { return j.is_null() || j.is_object(); }, "/result");
    if (w && w->is_object()) {
      need(*w, "period", is_int, "/result/witness");
      if (const json* pts = need(*w, "points", is_arr, "/result/witness"))
        for (const auto& p : *pts)
          if (!p.is_array() || !std::all_of(p.begin(), p.end(), is_cx)) bad.push_back("/result/witness/points: not complex vectors");
      if (const json* m = need(*w, "multipliers", is_arr, "/result/witness"))
        if (!std::all_of(m->begin(), m->end(), is_cx)) bad.push_back("/result/witness/multipliers: not complex numbers");
      need(*w, "max_multiplier_modulus", is_num, "/result/witness");
    }
    // Unbounded needs an expanding witness and dual-jet evidence.
    if (v && *v == "unbounded") {
      double band = r["provenance"]["tolerances"].value("stability_band", 1e-9);
      if (!w || !w->is_object() || !(*w)["max_multiplier_modulus"].is_number() ||
          (*w)["max_multiplier_modulus"].get<double>() <= 1.0 + band)
        bad.push_back("/result: unbounded verdict without an expanding witness");
      if (!c2 || (*c2)["kind"] == "unknown") bad.push_back("/result: unbounded verdict without condition-2 evidence");
    }
  } else if (*kind == "span") {
    need(*res, "spans", is_bool, "/result");
    need(*res, "alpha_sets", is_arr, "/result");
    need(*res, "basis", is_arr, "/result");
    need(*res, "closure_dimension", is_int, "/result");
  } else {
    need(*res, "table", one_of({"finite_section_norm", "monomial_ratio"}), "/result");
    if (const json* rows = need(*res, "rows", is_arr, "/result"))
      for (const auto& row : *rows)
        if (!row.is_object() || !row.contains("n") || !row["n"].is_number_integer()) bad.push_back("/result/rows: bad row");
  }
  return bad;
}

// ---------------------------------------------------------------- replay

namespace detail {

inline bool same_numbers(const json& a, const json& b, double tol) {
  if (a.is_number() && b.is_number()) {
    double x = a.get<double>(), y = b.get<double>();
    return std::abs(x - y) <= tol * (1.0 + std::max(std::abs(x), std::abs(y)));
  }
  if (a.type() != b.type()) return false;
  if (a.is_array() || a.is_object()) {
    if (a.size() != b.size()) return false;
    if (a.is_array()) {
      for (std::size_t i = 0; i < a.size(); ++i)
        if (!same_numbers(a[i], b[i], tol)) return false;
      return true;
    }
    for (auto it = a.begin(); it != a.end(); ++it)
      if (!b.contains(it.key()) || !same_numbers(it.value(), b[it.key()], tol)) return false;
    return true;
  }
  return a == b;
}

} // namespace detail

/// Re-run the config embedded in a report and compare verdict and witness.
inline json replay(const json& report, double tol = 1e-8) {
  json out = {{"schema", kSchema}, {"tool", kTool}, {"kind", "replay"}};
  auto problems = validate_report(report);
  if (!problems.empty() || report["status"] != "ok") {
    out["matches"] = false;
    out["problems"] = problems.empty() ? json::array({"report is not a completed job"}) : json(problems);
    return out;
  }
  Outcome again = run_job(report["provenance"]["config"]);
  json diffs = json::array();
  if (again.exit_code != kExitOk) {
    diffs.push_back("re-run failed: " + again.report["error"]["message"].get<std::string>());
  } else {
    const json& a = report["result"];
    const json& b = again.report["result"];
    if (a["kind"] == "certificate") {
      if (a["verdict"] != b["verdict"]) diffs.push_back("verdict");
      if (!detail::same_numbers(a["witness"], b["witness"], tol)) diffs.push_back("witness");
      if (a["condition2"]["kind"] != b["condition2"]["kind"]) diffs.push_back("condition2");
    } else if (!detail::same_numbers(a, b, tol)) {
      diffs.push_back("result");
    }
    if (report["provenance"]["config_hash"] != again.report["provenance"]["config_hash"]) diffs.push_back("config_hash");
  }
  out["matches"] = diffs.empty();
  out["differences"] = diffs;
  out["config_hash"] = report["provenance"]["config_hash"];
  return out;
}

} // namespace kgate::cli
