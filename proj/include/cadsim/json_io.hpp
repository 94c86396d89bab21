#pragma once

// Strict JSON helpers shared by every file format in the project.
// Errors carry a field path such as `agents[2].past[0].heading`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cadsim/error.hpp"

namespace cadsim::json_io {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) {
    throw IoError("read failure on '" + path.string() + "'");
  }
  return buf.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw IoError("write failure on '" + path.string() + "'");
  }
}

/// Parses `text`; syntax errors are reported as `source:line:column: message`.
inline Json parse(std::string_view text, std::string_view source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based and points one past the offending character.
    const std::size_t offset = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string msg = e.what();
    if (const auto pos = msg.find("parse error"); pos != std::string::npos) {
      msg = msg.substr(pos);
    }
    throw SchemaError(std::string(source) + ":" + std::to_string(line) + ":" +
                      std::to_string(column) + ": " + msg);
  }
}

inline Json parse_file(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

inline std::string type_name(const Json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  return j.type_name();
}

[[noreturn]] inline void type_mismatch(const std::string& path, std::string_view expected,
                                       const Json& got) {
  throw SchemaError(path + ": expected " + std::string(expected) + ", got " + type_name(got));
}

inline double as_number(const Json& j, const std::string& path) {
  if (!j.is_number()) type_mismatch(path, "number", j);
  return j.get<double>();
}

inline std::int64_t as_integer(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::trunc(v) && std::abs(v) < 9.0e15) {
      return static_cast<std::int64_t>(v);
    }
  }
  type_mismatch(path, "integer", j);
}

inline std::uint64_t as_unsigned(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const auto v = as_integer(j, path);
  if (v < 0) throw SchemaError(path + ": expected non-negative integer");
  return static_cast<std::uint64_t>(v);
}

inline bool as_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) type_mismatch(path, "boolean", j);
  return j.get<bool>();
}

inline const std::string& as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) type_mismatch(path, "string", j);
  return j.get_ref<const std::string&>();
}

inline const Json::array_t& as_array(const Json& j, const std::string& path) {
  if (!j.is_array()) type_mismatch(path, "array", j);
  return j.get_ref<const Json::array_t&>();
}

inline std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline std::string child_path(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

/// Reads fields of one JSON object and rejects any key that was never asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) type_mismatch(path_.empty() ? "<root>" : path_, "object", obj_);
  }

  const Json& required(std::string_view key) {
    consumed_.emplace_back(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) {
      throw SchemaError(field(key) + ": missing required field");
    }
    return *it;
  }

  const Json* optional(std::string_view key) {
    consumed_.emplace_back(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  double number(std::string_view key) { return as_number(required(key), field(key)); }
  std::int64_t integer(std::string_view key) { return as_integer(required(key), field(key)); }
  std::uint64_t unsigned_integer(std::string_view key) {
    return as_unsigned(required(key), field(key));
  }
  bool boolean(std::string_view key) { return as_bool(required(key), field(key)); }
  std::string string(std::string_view key) { return as_string(required(key), field(key)); }

  std::string field(std::string_view key) const { return child_path(path_, key); }
  const std::string& path() const { return path_; }

  /// Throws on the first key in the object that was not consumed.
  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end()) {
        throw SchemaError(child_path(path_, key) + ": unknown field");
      }
    }
  }

 private:
  const Json& obj_;
  std::string path_;
  std::vector<std::string> consumed_;
};

}  // namespace cadsim::json_io
