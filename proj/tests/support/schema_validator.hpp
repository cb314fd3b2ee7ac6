#pragma once

// Minimal JSON Schema checker covering the subset used by
// schemas/report.schema.json: type, required, properties, items, enum,
// minimum, additionalProperties. Returns a list of violations; empty means
// the document validates.

#include <string>
#include <vector>

#include "json.hpp"

namespace testutil {

inline bool type_matches(const nlohmann::json& value, const std::string& type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
  if (type == "number") return value.is_number();
  if (type == "boolean") return value.is_boolean();
  if (type == "null") return value.is_null();
  return false;
}

inline void validate_schema(const nlohmann::json& schema, const nlohmann::json& value,
                            const std::string& path, std::vector<std::string>& errors) {
  if (schema.contains("type") && !type_matches(value, schema["type"].get<std::string>())) {
    errors.push_back(path + ": expected type " + schema["type"].get<std::string>());
    return;
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& candidate : schema["enum"])
      if (candidate == value) found = true;
    if (!found) errors.push_back(path + ": value not in enum");
  }
  if (schema.contains("minimum") && value.is_number()) {
    if (value.get<double>() < schema["minimum"].get<double>())
      errors.push_back(path + ": below minimum");
  }
  if (value.is_object()) {
    if (schema.contains("required")) {
      for (const auto& key : schema["required"])
        if (!value.contains(key.get<std::string>()))
          errors.push_back(path + ": missing required key " + key.get<std::string>());
    }
    const nlohmann::json* properties =
        schema.contains("properties") ? &schema["properties"] : nullptr;
    if (properties != nullptr) {
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (properties->contains(it.key())) {
          validate_schema((*properties)[it.key()], it.value(), path + "/" + it.key(), errors);
        } else if (schema.contains("additionalProperties") &&
                   schema["additionalProperties"].is_boolean() &&
                   !schema["additionalProperties"].get<bool>()) {
          errors.push_back(path + ": unexpected key " + it.key());
        }
      }
    }
  }
  if (value.is_array() && schema.contains("items")) {
    for (size_t i = 0; i < value.size(); ++i)
      validate_schema(schema["items"], value[i], path + "[" + std::to_string(i) + "]", errors);
  }
}

inline std::vector<std::string> schema_violations(const nlohmann::json& schema,
                                                  const nlohmann::json& value) {
  std::vector<std::string> errors;
  validate_schema(schema, value, "$", errors);
  return errors;
}

}  // namespace testutil
