#pragma once

// JSON system/OCP files, CSV trajectories and atomic file output.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "json.hpp"

#include "phtp/model.hpp"

namespace phtp::io {

using Json = nlohmann::json;

/// Malformed input files (bad JSON, wrong keys, bad shapes).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Matrix matrix_from_json(const Json& j, const std::string& key) {
  if (!j.is_array()) throw FormatError(key + ": expected an array of rows");
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  if (r == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw FormatError(key + ": expected nested rows");
  const Eigen::Index c = static_cast<Eigen::Index>(j[0].size());
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const Json& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
      throw FormatError(key + ": ragged rows");
    }
    for (Eigen::Index k = 0; k < c; ++k) {
      const Json& v = row[static_cast<size_t>(k)];
      if (!v.is_number()) throw FormatError(key + ": non-numeric entry");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

inline Vector vector_from_json(const Json& j, const std::string& key) {
  if (!j.is_array()) throw FormatError(key + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError(key + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Parses text; syntax errors carry a line:column diagnostic.
inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    size_t line = 1, col = 1;
    const size_t stop = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw FormatError(origin + ":" + std::to_string(line) + ":" +
                      std::to_string(col) + ": malformed JSON");
  }
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json load_json(const std::filesystem::path& p) {
  return parse_json(read_file(p), p.string());
}

/// Write-then-rename so readers never observe a partial file.
inline void write_atomic(const std::filesystem::path& p,
                         const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

inline void write_json(const std::filesystem::path& p, const Json& j) {
  write_atomic(p, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Systems

using AnySystem = std::variant<PhOdeSystem, PhDaeSystem>;

struct LoadedSystem {
  AnySystem system;  // valid only when violations is empty
  std::vector<Violation> violations;
  bool dae = false;
  bool ok() const { return violations.empty(); }
};

inline Matrix required(const Json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing key \"") + key + "\"");
  return matrix_from_json(j.at(key), key);
}

/// A file with "E" is a pH-DAE, otherwise a pH-ODE (optional "P", "D").
inline LoadedSystem system_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("system file must be a JSON object");
  LoadedSystem out;
  const Matrix J = required(j, "J"), R = required(j, "R"), Q = required(j, "Q"),
               B = required(j, "B");
  if (j.contains("E")) {
    out.dae = true;
    if (j.contains("P") || j.contains("D")) {
      throw FormatError("\"P\"/\"D\" are not allowed together with \"E\"");
    }
    auto v = validate_ph_dae(required(j, "E"), J, R, Q, B);
    out.violations = v.violations;
    if (v.ok()) out.system = *v.system;
  } else {
    const Eigen::Index n = J.rows(), m = B.cols();
    const Matrix P = j.contains("P") ? required(j, "P") : Matrix::Zero(n, m);
    const Matrix D = j.contains("D") ? required(j, "D") : Matrix::Zero(m, m);
    auto v = validate_ph_ode(J, R, Q, B, P, D);
    out.violations = v.violations;
    if (v.ok()) out.system = *v.system;
  }
  return out;
}

inline Json system_to_json(const AnySystem& s) {
  Json j;
  if (const auto* d = std::get_if<PhDaeSystem>(&s)) {
    j["E"] = to_json(d->E);
    j["J"] = to_json(d->J);
    j["R"] = to_json(d->R);
    j["Q"] = to_json(d->Q);
    j["B"] = to_json(d->B);
  } else {
    const auto& o = std::get<PhOdeSystem>(s);
    j["J"] = to_json(o.J);
    j["R"] = to_json(o.R);
    j["Q"] = to_json(o.Q);
    j["B"] = to_json(o.B);
    j["P"] = to_json(o.P);
    j["D"] = to_json(o.D);
  }
  return j;
}

// ---------------------------------------------------------------------------
// OCP specs

inline ControlSet control_from_json(const Json& j, Eigen::Index m) {
  if (j.contains("box")) {
    const Json& b = j.at("box");
    return ControlSet::box(vector_from_json(b.at("lower"), "control_set.lower"),
                           vector_from_json(b.at("upper"), "control_set.upper"));
  }
  if (j.contains("ball")) {
    return ControlSet::ball(m, j.at("ball").at("radius").get<double>());
  }
  throw FormatError("control_set: expected \"box\" or \"ball\"");
}

inline TargetSet target_from_json(const Json& j) {
  if (j.is_null()) return TargetSet::free();
  if (j.contains("point")) {
    return TargetSet::at(vector_from_json(j.at("point"), "target.point"));
  }
  if (j.contains("G")) {
    return TargetSet::affine_box(matrix_from_json(j.at("G"), "target.G"),
                                 vector_from_json(j.at("l"), "target.l"),
                                 vector_from_json(j.at("u"), "target.u"));
  }
  throw FormatError("target: expected \"point\" or \"G\"/\"l\"/\"u\"");
}

/// Throws ValidationError when the embedded system violates the pH conditions.
inline OcpSpec spec_from_json(const Json& j) {
  const LoadedSystem ls = system_from_json(j);
  if (!ls.ok()) throw ValidationError(describe(ls.violations));
  OcpSpec spec;
  spec.system = ls.system;
  try {
    spec.T = j.at("T").get<double>();
    spec.N = j.at("N").get<int>();
  } catch (const Json::exception&) {
    throw FormatError("OCP file needs numeric \"T\" and integer \"N\"");
  }
  const char* init = ls.dae ? "w0" : "x0";
  if (j.contains("w0")) init = "w0";
  if (j.contains("x0")) init = "x0";
  if (!j.contains(init)) throw FormatError("OCP file needs \"x0\" or \"w0\"");
  spec.initial = vector_from_json(j.at(init), init);
  spec.target = target_from_json(j.contains("target") ? j.at("target") : Json());
  spec.control = j.contains("control_set")
                     ? control_from_json(j.at("control_set"), spec.m())
                     : ControlSet::default_box(spec.m());
  spec.check();
  return spec;
}

inline Json spec_to_json(const OcpSpec& spec) {
  Json j = system_to_json(spec.system);
  j["T"] = spec.T;
  j["N"] = spec.N;
  j[spec.is_dae() ? "w0" : "x0"] = to_json(spec.initial);
  switch (spec.target.kind) {
    case TargetSet::Kind::Free:
      j["target"] = nullptr;
      break;
    case TargetSet::Kind::Point:
      j["target"] = {{"point", to_json(spec.target.point)}};
      break;
    case TargetSet::Kind::AffineBox:
      j["target"] = {{"G", to_json(spec.target.G)},
                     {"l", to_json(spec.target.l)},
                     {"u", to_json(spec.target.u)}};
      break;
  }
  if (spec.control.kind == ControlSet::Kind::Ball) {
    j["control_set"] = {{"ball", {{"radius", spec.control.radius}}}};
  } else {
    j["control_set"] = {{"box",
                         {{"lower", to_json(spec.control.lower)},
                          {"upper", to_json(spec.control.upper)}}}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Columns in `names`, one row per index; all columns must share a length.
inline std::string csv(const std::vector<std::string>& names,
                       const std::vector<Vector>& cols, char sep = ',') {
  std::string out;
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) out += sep;
    out += names[i];
  }
  out += '\n';
  const Eigen::Index rows = cols.empty() ? 0 : cols[0].size();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (size_t i = 0; i < cols.size(); ++i) {
      if (i) out += sep;
      out += fmt(cols[i](r));
    }
    out += '\n';
  }
  return out;
}

/// Parsed CSV: header names and columns.
struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
};

inline Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("csv: empty");
  {
    std::istringstream hs(line);
    std::string name;
    while (std::getline(hs, name, ',')) t.names.push_back(name);
  }
  t.cols.resize(t.names.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    size_t i = 0;
    while (std::getline(ls, cell, ',')) {
      if (i >= t.cols.size()) throw FormatError("csv: too many cells");
      t.cols[i++].push_back(std::stod(cell));
    }
    if (i != t.cols.size()) throw FormatError("csv: too few cells");
  }
  return t;
}

}  // namespace phtp::io
