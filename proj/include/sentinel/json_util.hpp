#pragma once

#include <string>

#include <json.hpp>

namespace sentinel {

// Parses JSON text, converting nlohmann byte offsets into the line/column
// carried by ParseError.
nlohmann::json parse_json(const std::string& text);

// Reads and parses a whole file; MissingFile on IO failure.
nlohmann::json parse_json_file(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Field accessors that throw SchemaError naming the offending field.
const nlohmann::json& require_field(const nlohmann::json& obj, const std::string& field);
std::string require_string(const nlohmann::json& obj, const std::string& field);
std::int64_t require_int(const nlohmann::json& obj, const std::string& field);
double require_double(const nlohmann::json& obj, const std::string& field);

} // namespace sentinel
