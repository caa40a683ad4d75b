#include "sentinel/json_util.hpp"

#include <fstream>
#include <sstream>

#include "sentinel/errors.hpp"

namespace sentinel {

namespace {

// nlohmann reports a byte offset; recover 1-based line/column from the text.
std::pair<int, int> line_column_at(const std::string& text, std::size_t byte_pos) {
    int line = 1;
    int col = 1;
    const std::size_t stop = std::min(byte_pos, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace

nlohmann::json parse_json(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = line_column_at(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(e.what(), line, col);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingFileError("cannot open '" + path + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw MissingFileError("cannot open '" + path + "' for writing");
    }
    out << content;
    if (!out) {
        throw MissingFileError("write to '" + path + "' failed");
    }
}

nlohmann::json parse_json_file(const std::string& path) {
    return parse_json(read_file(path));
}

const nlohmann::json& require_field(const nlohmann::json& obj, const std::string& field) {
    if (!obj.is_object()) {
        throw SchemaError(field, "expected an enclosing object");
    }
    auto it = obj.find(field);
    if (it == obj.end()) {
        throw SchemaError(field, "missing");
    }
    return *it;
}

std::string require_string(const nlohmann::json& obj, const std::string& field) {
    const auto& v = require_field(obj, field);
    if (!v.is_string()) {
        throw SchemaError(field, "expected a string");
    }
    return v.get<std::string>();
}

std::int64_t require_int(const nlohmann::json& obj, const std::string& field) {
    const auto& v = require_field(obj, field);
    if (!v.is_number_integer()) {
        throw SchemaError(field, "expected an integer");
    }
    return v.get<std::int64_t>();
}

double require_double(const nlohmann::json& obj, const std::string& field) {
    const auto& v = require_field(obj, field);
    if (!v.is_number()) {
        throw SchemaError(field, "expected a number");
    }
    return v.get<double>();
}

} // namespace sentinel
