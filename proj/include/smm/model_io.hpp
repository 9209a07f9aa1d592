#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "smm/map_ph.hpp"

namespace smm {

namespace detail {

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ValidationError("model json: " + where + " must be a nonempty array of rows");
  const size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0)
    throw ValidationError("model json: " + where + " rows must be nonempty arrays");
  Matrix M(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ValidationError("model json: " + where + " row " + std::to_string(r) +
                            " has inconsistent length");
    for (size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        throw ValidationError("model json: " + where + "[" + std::to_string(r) +
                              "][" + std::to_string(c) + "] is not a number");
      M(r, c) = j[r][c].get<double>();
    }
  }
  return M;
}

inline nlohmann::json matrix_to_json(const Matrix& M) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    j.push_back(row);
  }
  return j;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ModelSpec& m) {
  nlohmann::json j;
  if (!m.name.empty()) j["name"] = m.name;
  j["d"] = m.d;
  j["map"]["C"] = detail::matrix_to_json(m.map.C);
  j["map"]["D"] = detail::matrix_to_json(m.map.D);
  nlohmann::json alpha = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.ph.alpha.size(); ++i)
    alpha.push_back(m.ph.alpha(i));
  j["ph"]["alpha"] = alpha;
  j["ph"]["T"] = detail::matrix_to_json(m.ph.T);
  return j;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec m;
  try {
    if (!j.contains("map") || !j["map"].contains("C") || !j["map"].contains("D"))
      throw ValidationError("model json: missing map.C or map.D");
    if (!j.contains("ph") || !j["ph"].contains("alpha") || !j["ph"].contains("T"))
      throw ValidationError("model json: missing ph.alpha or ph.T");
    if (!j.contains("d") || !j["d"].is_number_integer())
      throw ValidationError("model json: missing integer d");
    m.map.C = detail::matrix_from_json(j["map"]["C"], "map.C");
    m.map.D = detail::matrix_from_json(j["map"]["D"], "map.D");
    Matrix T = detail::matrix_from_json(j["ph"]["T"], "ph.T");
    const auto& ja = j["ph"]["alpha"];
    if (!ja.is_array() || ja.empty())
      throw ValidationError("model json: ph.alpha must be a nonempty array");
    RowVec alpha(ja.size());
    for (size_t i = 0; i < ja.size(); ++i) {
      if (!ja[i].is_number())
        throw ValidationError("model json: ph.alpha[" + std::to_string(i) +
                              "] is not a number");
      alpha(Eigen::Index(i)) = ja[i].get<double>();
    }
    m.ph.alpha = alpha;
    m.ph.T = T;
    m.d = j["d"].get<int>();
    if (j.contains("name")) m.name = j["name"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model json: ") + e.what());
  }
  validate_model(m);
  return m;
}

inline ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model json parse error in " + path + ": " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const ModelSpec& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write model file: " + path);
  out << model_to_json(m).dump(2) << "\n";
}

// Stable content hash of a model (FNV-1a over the canonical serialization);
// used in CSV provenance comments.
inline std::string model_hash(const ModelSpec& m) {
  std::ostringstream os;
  os.precision(17);
  os << m.d << ";";
  auto dump = [&os](const Matrix& M) {
    for (Eigen::Index r = 0; r < M.rows(); ++r)
      for (Eigen::Index c = 0; c < M.cols(); ++c) os << M(r, c) << ",";
    os << ";";
  };
  dump(m.map.C);
  dump(m.map.D);
  for (Eigen::Index i = 0; i < m.ph.alpha.size(); ++i) os << m.ph.alpha(i) << ",";
  os << ";";
  dump(m.ph.T);
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

// Canonical building blocks.
inline MapDescriptor poisson_map(double lambda) {
  Matrix C(1, 1), D(1, 1);
  C(0, 0) = -lambda;
  D(0, 0) = lambda;
  return make_map(std::move(C), std::move(D));
}

inline PhDistribution exponential_ph(double mu) {
  RowVec a(1);
  a(0) = 1.0;
  Matrix T(1, 1);
  T(0, 0) = -mu;
  return make_ph(std::move(a), std::move(T));
}

inline PhDistribution erlang_ph(int stages, double eta) {
  if (stages < 1) throw ValidationError("erlang_ph: stages must be >= 1");
  RowVec a = RowVec::Zero(stages);
  a(0) = 1.0;
  Matrix T = Matrix::Zero(stages, stages);
  for (int i = 0; i < stages; ++i) {
    T(i, i) = -eta;
    if (i + 1 < stages) T(i, i + 1) = eta;
  }
  return make_ph(std::move(a), std::move(T));
}

// Two-phase service law used in the comparison studies: mean 17/58.
inline PhDistribution two_phase_ph() {
  RowVec a(2);
  a << 0.5, 0.5;
  Matrix T(2, 2);
  T << -5, 3, 2, -7;
  return make_ph(std::move(a), std::move(T));
}

// Family of two-phase service laws with increasing means (variant 1 equals
// two_phase_ph).
inline PhDistribution two_phase_family(int variant) {
  RowVec a(2);
  a << 0.5, 0.5;
  Matrix T(2, 2);
  if (variant == 1)
    T << -5, 3, 2, -7;
  else if (variant == 2)
    T << -4, 3, 2, -7;
  else if (variant == 3)
    T << -4, 4, 2, -7;
  else
    throw ValidationError("two_phase_family: variant must be 1, 2 or 3");
  return make_ph(std::move(a), std::move(T));
}

// Two-phase MAP with stationary arrival rate exactly lambda and stationary
// phase vector (7/12, 5/12).
inline MapDescriptor two_phase_map(double lambda) {
  if (lambda <= 0.0) throw ValidationError("two_phase_map: lambda must be > 0");
  Matrix C(2, 2), D(2, 2);
  C << -5.0 - 2.0 / 7.0 * lambda, 5.0, 7.0, -7.0 - 2.0 * lambda;
  D << 2.0 / 7.0 * lambda, 0.0, 0.0, 2.0 * lambda;
  return make_map(std::move(C), std::move(D));
}

inline ModelSpec make_model(MapDescriptor map, PhDistribution ph, int d,
                            std::string name = "") {
  ModelSpec m{std::move(map), std::move(ph), d, std::move(name)};
  validate_model(m);
  return m;
}

}  // namespace smm
