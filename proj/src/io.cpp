#include "steadytube/config.hpp"
#include "steadytube/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace steadytube {

namespace config {

void require_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ValidationError(ctx + ": expected a JSON object");
}

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& ctx) {
  require_object(j, ctx);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ValidationError(ctx + ": unknown key '" + it.key() + "'");
  }
}

double number(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw ValidationError(ctx + ": missing key '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_number()) throw ValidationError(ctx + ": '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(ctx + ": '" + key + "' must be finite");
  return d;
}

double number_or(const json& j, const char* key, double fallback, const std::string& ctx) {
  return j.contains(key) ? number(j, key, ctx) : fallback;
}

long long integer_or(const json& j, const char* key, long long fallback, const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ValidationError(ctx + ": '" + key + "' must be an integer");
  return v.get<long long>();
}

std::string string_or(const json& j, const char* key, const std::string& fallback, const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) throw ValidationError(ctx + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

Vec as_vector(const json& v, const std::string& ctx) {
  if (v.is_number()) return Vec::Constant(1, v.get<double>());
  if (!v.is_array()) throw ValidationError(ctx + ": expected an array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ValidationError(ctx + ": expected an array of numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    if (!std::isfinite(out[static_cast<Eigen::Index>(i)])) throw ValidationError(ctx + ": non-finite entry");
  }
  return out;
}

Mat as_matrix(const json& v, const std::string& ctx) {
  if (v.is_number()) return Mat::Constant(1, 1, v.get<double>());
  if (!v.is_array() || v.empty()) throw ValidationError(ctx + ": expected a nested array (rows)");
  if (v[0].is_number()) {
    // a single row given flat is read as a row vector only for 1x1; otherwise ambiguous
    Vec row = as_vector(v, ctx);
    if (row.size() != 1) throw ValidationError(ctx + ": matrices must be given as arrays of rows");
    return Mat::Constant(1, 1, row[0]);
  }
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Mat out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    Vec row = as_vector(v[i], ctx);
    if (static_cast<std::size_t>(row.size()) != cols) throw ValidationError(ctx + ": ragged matrix");
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

Vec vector(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw ValidationError(ctx + ": missing key '" + key + "'");
  return as_vector(j.at(key), ctx + "." + key);
}

std::optional<Vec> vector_opt(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) return std::nullopt;
  return as_vector(j.at(key), ctx + "." + key);
}

Mat matrix(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw ValidationError(ctx + ": missing key '" + key + "'");
  return as_matrix(j.at(key), ctx + "." + key);
}

std::optional<Mat> matrix_opt(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) return std::nullopt;
  return as_matrix(j.at(key), ctx + "." + key);
}

}  // namespace config

namespace io {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> Provenance::lines() const {
  std::vector<std::string> out;
  out.push_back("tool: steadytube " + std::string(kVersion));
  out.push_back("command: " + command);
  out.push_back("config_hash: " + config_hash);
  out.push_back("tolerances: " + tolerances.dump());
  out.push_back("seed: " + std::to_string(seed));
  out.push_back("generated: " + generated);
  return out;
}

nlohmann::ordered_json Provenance::to_json() const {
  nlohmann::ordered_json j;
  j["tool"] = "steadytube";
  j["version"] = kVersion;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["tolerances"] = tolerances;
  j["seed"] = seed;
  j["generated"] = generated;
  return j;
}

void write_csv(const std::string& path, const Provenance& prov, const std::vector<std::string>& comments,
               const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows,
               const std::vector<std::string>& trailing) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open output file " + path);
  for (const auto& l : prov.lines()) os << "# " << l << '\n';
  for (const auto& c : comments) os << "# " << c << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_double(row[i]);
    os << '\n';
  }
  for (const auto& c : trailing) os << "# " << c << '\n';
}

void write_json(const std::string& path, const Provenance& prov, const nlohmann::ordered_json& body) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open output file " + path);
  nlohmann::ordered_json doc;
  doc["provenance"] = prov.to_json();
  for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
  os << doc.dump(2) << '\n';
}

nlohmann::ordered_json to_json(const Vec& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

nlohmann::ordered_json to_json(const Mat& m) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
  return a;
}

}  // namespace io
}  // namespace steadytube
