#pragma once

#include "steadytube/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace steadytube::io {

inline constexpr const char* kVersion = "1.0.0";

struct Provenance {
  std::string command;
  std::string config_hash;
  nlohmann::ordered_json tolerances = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::string generated;  // timestamp, header only

  std::vector<std::string> lines() const;
  nlohmann::ordered_json to_json() const;
};

std::string format_double(double v);
std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t v);
std::string utc_timestamp();

// '#'-prefixed provenance and comments, one header row, then data rows.
void write_csv(const std::string& path, const Provenance& prov, const std::vector<std::string>& comments,
               const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows,
               const std::vector<std::string>& trailing = {});

// {"provenance": ..., body keys in order}
void write_json(const std::string& path, const Provenance& prov, const nlohmann::ordered_json& body);

nlohmann::ordered_json to_json(const Vec& v);
nlohmann::ordered_json to_json(const Mat& m);

}  // namespace steadytube::io
