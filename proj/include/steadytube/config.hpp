#pragma once

// Small helpers for strict JSON configs.

#include "steadytube/types.hpp"

#include <json.hpp>

#include <initializer_list>
#include <optional>
#include <string>

namespace steadytube::config {

using json = nlohmann::json;

void require_object(const json& j, const std::string& ctx);
void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& ctx);
double number(const json& j, const char* key, const std::string& ctx);
double number_or(const json& j, const char* key, double fallback, const std::string& ctx);
long long integer_or(const json& j, const char* key, long long fallback, const std::string& ctx);
std::string string_or(const json& j, const char* key, const std::string& fallback, const std::string& ctx);
Vec vector(const json& j, const char* key, const std::string& ctx);
std::optional<Vec> vector_opt(const json& j, const char* key, const std::string& ctx);
Mat matrix(const json& j, const char* key, const std::string& ctx);
std::optional<Mat> matrix_opt(const json& j, const char* key, const std::string& ctx);
Vec as_vector(const json& v, const std::string& ctx);
Mat as_matrix(const json& v, const std::string& ctx);

}  // namespace steadytube::config
