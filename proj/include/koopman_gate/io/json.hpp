#pragma once

// JSON encoding of the domain types. Complex numbers are [re, im] pairs on
// output; on input a bare number, [re, im] or {"re": .., "im": ..} is accepted.
// Parse errors carry a JSON-pointer style path to the offending value.

#include <string>
#include <vector>

#include <json.hpp>
#include "koopman_gate/certify.hpp"

namespace kgate::io {

using nlohmann::json;

/// Malformed job input; `path` points at the offending value.
class ConfigError : public Error {
public:
  ConfigError(std::string path, const std::string& msg) : Error(path + ": " + msg), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

// ---------------------------------------------------------------- reading

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const json& require_key(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(child(path, key), "required field is missing");
  return *it;
}

inline double read_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

inline int read_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

inline bool read_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

inline std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

inline const json& read_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  return j;
}

inline Cx read_complex(const json& j, const std::string& path) {
  if (j.is_number()) return read_double(j, path);
  if (j.is_array()) {
    if (j.size() != 2) throw ConfigError(path, "complex number must be [re, im]");
    return {read_double(j[0], child(path, 0)), read_double(j[1], child(path, 1))};
  }
  if (j.is_object()) {
    double re = j.contains("re") ? read_double(j["re"], child(path, "re")) : 0.0;
    double im = j.contains("im") ? read_double(j["im"], child(path, "im")) : 0.0;
    return {re, im};
  }
  throw ConfigError(path, "expected a complex number (number, [re, im] or {re, im})");
}

inline std::vector<Cx> read_complex_list(const json& j, const std::string& path) {
  std::vector<Cx> out;
  for (std::size_t i = 0; i < read_array(j, path).size(); ++i) out.push_back(read_complex(j[i], child(path, i)));
  return out;
}

inline std::vector<double> read_double_list(const json& j, const std::string& path) {
  std::vector<double> out;
  for (std::size_t i = 0; i < read_array(j, path).size(); ++i) out.push_back(read_double(j[i], child(path, i)));
  return out;
}

inline CxVector read_cvector(const json& j, const std::string& path) {
  auto v = read_complex_list(j, path);
  if (v.empty()) throw ConfigError(path, "expected a non-empty vector");
  return Eigen::Map<CxVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::VectorXd read_rvector(const json& j, const std::string& path) {
  auto v = read_double_list(j, path);
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline CxMatrix read_cmatrix(const json& j, const std::string& path) {
  read_array(j, path);
  if (j.empty()) throw ConfigError(path, "expected a non-empty matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  CxMatrix M;
  for (std::size_t r = 0; r < j.size(); ++r) {
    auto row = read_complex_list(j[r], child(path, r));
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      M.resize(rows, cols);
    }
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError(child(path, r), "ragged matrix row");
    for (Eigen::Index c = 0; c < cols; ++c) M(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
  }
  return M;
}

inline Eigen::MatrixXd read_rmatrix(const json& j, const std::string& path) {
  CxMatrix M = read_cmatrix(j, path);
  if (M.imag().cwiseAbs().maxCoeff() != 0.0) throw ConfigError(path, "expected a real matrix");
  return M.real();
}

inline MultiIndex read_index(const json& j, const std::string& path) {
  MultiIndex a;
  for (std::size_t i = 0; i < read_array(j, path).size(); ++i) {
    int v = read_int(j[i], child(path, i));
    if (v < 0) throw ConfigError(child(path, i), "exponent must be >= 0");
    a.push_back(v);
  }
  if (a.empty()) throw ConfigError(path, "empty multi-index");
  return a;
}

/// {"coeffs": [c0, c1, ...]} (one variable) or {"dim": d, "components": [[{"index": [...], "coeff": c}, ...], ...]}.
inline PolyMap read_map(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  if (j.contains("coeffs")) {
    auto c = read_complex_list(j["coeffs"], child(path, "coeffs"));
    if (c.empty()) throw ConfigError(child(path, "coeffs"), "empty coefficient list");
    return PolyMap(1, {MultiPoly::univariate(c)});
  }
  const int d = read_int(require_key(j, "dim", path), child(path, "dim"));
  if (d < 1) throw ConfigError(child(path, "dim"), "dimension must be >= 1");
  const std::string cp = child(path, "components");
  const json& comps = read_array(require_key(j, "components", path), cp);
  if (static_cast<int>(comps.size()) != d) throw ConfigError(cp, "need one component per dimension");
  std::vector<MultiPoly> out;
  for (std::size_t m = 0; m < comps.size(); ++m) {
    const std::string mp = child(cp, m);
    MultiPoly p(d);
    for (std::size_t t = 0; t < read_array(comps[m], mp).size(); ++t) {
      const std::string tp = child(mp, t);
      MultiIndex a = read_index(require_key(comps[m][t], "index", tp), child(tp, "index"));
      if (static_cast<int>(a.size()) != d) throw ConfigError(child(tp, "index"), "index length must equal dim");
      p.add_term(a, read_complex(require_key(comps[m][t], "coeff", tp), child(tp, "coeff")));
    }
    out.push_back(std::move(p));
  }
  return PolyMap(d, std::move(out));
}

inline SpaceDescriptor read_space(const json& j, const std::string& path) {
  const std::string fam = read_string(require_key(j, "family", path), child(path, "family"));
  const int d = j.contains("dim") ? read_int(j["dim"], child(path, "dim")) : 1;
  if (d < 1) throw ConfigError(child(path, "dim"), "dimension must be >= 1");
  SpaceDescriptor s;
  if (fam == "fock") {
    FockSpace f;
    f.dim = d;
    if (j.contains("alpha")) f.alpha = read_double(j["alpha"], child(path, "alpha"));
    if (j.contains("q")) f.q = read_double(j["q"], child(path, "q"));
    s = f;
  } else if (fam == "power_series") {
    const std::string kind = read_string(require_key(j, "kind", path), child(path, "kind"));
    PowerSeriesSpace ps;
    ps.dim = d;
    if (kind == "explicit") {
      ExplicitSeries e;
      const std::string cp = child(path, "coeffs");
      const json& cs = read_array(require_key(j, "coeffs", path), cp);
      for (std::size_t i = 0; i < cs.size(); ++i) {
        const std::string ip = child(cp, i);
        MultiIndex a = read_index(require_key(cs[i], "index", ip), child(ip, "index"));
        if (static_cast<int>(a.size()) != d) throw ConfigError(child(ip, "index"), "index length must equal dim");
        e.coeffs[a] = read_double(require_key(cs[i], "value", ip), child(ip, "value"));
      }
      if (j.contains("complete")) e.complete = read_bool(j["complete"], child(path, "complete"));
      ps.family = e;
    } else if (kind == "composite") {
      CompositeSeries c;
      const std::string rule = read_string(require_key(j, "rule", path), child(path, "rule"));
      if (rule == "exp") c.rule = PhiRule::Exp;
      else if (rule == "geometric") c.rule = PhiRule::Geometric;
      else if (rule == "explicit") c.rule = PhiRule::Explicit;
      else throw ConfigError(child(path, "rule"), "unknown rule '" + rule + "' (exp, geometric, explicit)");
      if (j.contains("scale")) c.scale = read_double(j["scale"], child(path, "scale"));
      if (j.contains("rate")) c.rate = read_double(j["rate"], child(path, "rate"));
      if (j.contains("phi")) c.phi = read_double_list(j["phi"], child(path, "phi"));
      ps.family = c;
    } else if (kind == "exponential") {
      ExponentialSeries e;
      if (j.contains("scale")) e.scale = read_double(j["scale"], child(path, "scale"));
      e.rates = read_double_list(require_key(j, "rates", path), child(path, "rates"));
      ps.family = e;
    } else {
      throw ConfigError(child(path, "kind"), "unknown kind '" + kind + "' (explicit, composite, exponential)");
    }
    s = ps;
  } else if (fam == "shift_invariant") {
    ShiftInvariantSpace si;
    si.dim = d;
    if (j.contains("gaussians")) {
      const std::string gp = child(path, "gaussians");
      for (std::size_t i = 0; i < read_array(j["gaussians"], gp).size(); ++i) {
        const json& g = j["gaussians"][i];
        const std::string ip = child(gp, i);
        GaussianComponent c;
        if (g.contains("weight")) c.weight = read_double(g["weight"], child(ip, "weight"));
        c.mean = g.contains("mean") ? read_rvector(g["mean"], child(ip, "mean")) : Eigen::VectorXd::Zero(d);
        c.cov = g.contains("cov") ? read_rmatrix(g["cov"], child(ip, "cov")) : Eigen::MatrixXd::Identity(d, d);
        si.gaussians.push_back(std::move(c));
      }
    }
    if (j.contains("atoms")) {
      const std::string ap = child(path, "atoms");
      for (std::size_t i = 0; i < read_array(j["atoms"], ap).size(); ++i) {
        const json& a = j["atoms"][i];
        const std::string ip = child(ap, i);
        Atom at;
        if (a.contains("weight")) at.weight = read_double(a["weight"], child(ip, "weight"));
        at.location = read_rvector(require_key(a, "location", ip), child(ip, "location"));
        si.atoms.push_back(std::move(at));
      }
    }
    if (j.contains("strips")) si.strips = read_rvector(j["strips"], child(path, "strips"));
    s = si;
  } else {
    throw ConfigError(child(path, "family"), "unknown family '" + fam + "' (fock, power_series, shift_invariant)");
  }
  try {
    validate(s);
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return s;
}

inline Letter read_letter(const json& j, const std::string& path) {
  const std::string type = read_string(require_key(j, "type", path), child(path, "type"));
  Letter L;
  if (type == "affine") {
    CxMatrix A = read_cmatrix(require_key(j, "A", path), child(path, "A"));
    CxVector t = j.contains("t") ? read_cvector(j["t"], child(path, "t")) : CxVector::Zero(2);
    if (A.rows() != 2 || A.cols() != 2) throw ConfigError(child(path, "A"), "affine letter needs a 2x2 matrix");
    if (t.size() != 2) throw ConfigError(child(path, "t"), "affine letter needs a 2-vector");
    L = AffineLetter{A, t};
  } else if (type == "elementary") {
    ElementaryLetter e;
    e.P = MultiPoly::univariate(read_complex_list(require_key(j, "P", path), child(path, "P")));
    e.a = j.contains("a") ? read_complex(j["a"], child(path, "a")) : Cx(1.0);
    e.b = j.contains("b") ? read_complex(j["b"], child(path, "b")) : Cx(1.0);
    e.c = j.contains("c") ? read_complex(j["c"], child(path, "c")) : Cx(0.0);
    L = e;
  } else if (type == "henon") {
    HenonLetter h;
    h.Q = MultiPoly::univariate(read_complex_list(require_key(j, "Q", path), child(path, "Q")));
    h.b = read_complex(require_key(j, "b", path), child(path, "b"));
    L = h;
  } else {
    throw ConfigError(child(path, "type"), "unknown letter type '" + type + "' (affine, elementary, henon)");
  }
  try {
    validate(L);
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return L;
}

inline AutWord read_word(const json& j, const std::string& path) {
  AutWord w;
  for (std::size_t i = 0; i < read_array(j, path).size(); ++i) w.letters.push_back(read_letter(j[i], child(path, i)));
  if (w.letters.empty()) throw ConfigError(path, "empty word");
  return w;
}

// ---------------------------------------------------------------- writing

// +0.0 folds -0.0 away so reports diff cleanly.
inline json to_json(Cx z) { return json::array({z.real() + 0.0, z.imag() + 0.0}); }

inline json to_json(const CxVector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(to_json(v(i)));
  return a;
}

inline json to_json(const CxMatrix& M) {
  json a = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) a.push_back(to_json(CxVector(M.row(r).transpose())));
  return a;
}

inline json to_json(const Tolerances& t) {
  return {{"fixed_point", t.fixed_point},     {"stability_band", t.stability_band}, {"rank_relative", t.rank_relative},
          {"root_cluster", t.root_cluster},   {"orbit_dedup", t.orbit_dedup},       {"newton_residual", t.newton_residual},
          {"relation", t.relation},           {"leakage", t.leakage}};
}

inline json to_json(const PeriodicOrbit& o) {
  json pts = json::array();
  for (const auto& p : o.points) pts.push_back(to_json(p));
  json mult = json::array();
  for (Cx l : o.multipliers) mult.push_back(to_json(l));
  return {{"period", o.period},
          {"points", pts},
          {"multipliers", mult},
          {"max_multiplier_modulus", o.max_multiplier_modulus()},
          {"stability", to_string(o.stability)},
          {"residual", o.residual}};
}

inline json to_json(const AlphaSet& a) {
  json roots = json::array();
  for (Cx r : a.roots) roots.push_back(to_json(r));
  return {{"kind", to_string(a.kind)}, {"roots", roots}};
}

inline json to_json(const SpanVerdict& v) {
  json sets = json::array();
  for (const auto& a : v.alpha_sets) sets.push_back(to_json(a));
  json basis = json::array();
  for (std::size_t i = 0; i < v.basis.size(); ++i)
    basis.push_back({{"word", v.basis_words[i]}, {"matrix", to_json(v.basis[i])}});
  return {{"spans", v.spans},
          {"alpha_sets", sets},
          {"intersection", to_json(v.intersection)},
          {"some_b21_nonzero", v.some_b21_nonzero},
          {"all_b21_zero", !v.some_b21_nonzero},
          {"basis", basis},
          {"common_root", v.common_root ? to_json(*v.common_root) : json(nullptr)},
          {"closure_dimension", v.closure_dimension}};
}

inline json to_json(const PeriodSearchLog& l) {
  return {{"period", l.period}, {"method", l.method}, {"starts", l.starts},
          {"converged", l.converged}, {"orbits", l.orbits}, {"box", l.box}};
}

inline json to_json(const Certificate& c) {
  json trace = json::array();
  for (const auto& t : c.norm_trace) trace.push_back({{"n", t.n}, {"value", t.value}, {"rank_deficient", t.rank_deficient}});
  json search = json::array();
  for (const auto& s : c.orbit_search) search.push_back({{"period", s.period}, {"orbits", s.orbits}, {"repelling", s.repelling}});
  json saddle = json::array();
  for (const auto& s : c.saddle_search) saddle.push_back(to_json(s));
  return {{"kind", "certificate"},
          {"verdict", to_string(c.verdict)},
          {"theorem", to_string(c.theorem)},
          {"reason", c.reason},
          {"scope", c.scope},
          {"witness", c.witness ? to_json(*c.witness) : json(nullptr)},
          {"condition2", {{"kind", to_string(c.condition2.kind)}, {"probed", c.condition2.probed}, {"reason", c.condition2.reason}}},
          {"norm_trace", trace},
          {"orbit_search", search},
          {"saddle_search", saddle},
          {"span", c.span ? to_json(*c.span) : json(nullptr)},
          {"core", c.core ? json(to_string(*c.core)) : json(nullptr)},
          {"affine_rule_bounded", c.affine_rule_bounded ? json(*c.affine_rule_bounded) : json(nullptr)}};
}

} // namespace kgate::io
