#pragma once

// Canonical JSON serialization: object keys sorted, doubles printed with 17
// significant digits (enough to round-trip binary64 exactly), integers kept
// integral, non-finite numbers rejected. Two semantically equal documents
// always serialize to identical bytes, which makes report diffs meaningful
// and reruns byte-comparable.

#include <cmath>
#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

#include "specprobe/errors.hpp"

namespace specprobe {

using json = nlohmann::json;

namespace canon_detail {

inline void dump(const json& v, std::string& out) {
  switch (v.type()) {
    case json::value_t::null:
      out += "null";
      break;
    case json::value_t::boolean:
      out += v.get<bool>() ? "true" : "false";
      break;
    case json::value_t::number_integer:
      out += std::to_string(v.get<std::int64_t>());
      break;
    case json::value_t::number_unsigned:
      out += std::to_string(v.get<std::uint64_t>());
      break;
    case json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d))
        throw validation_error("canonical json: non-finite number");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", d);
      out += buf;
      break;
    }
    case json::value_t::string:
      out += json(v.get<std::string>()).dump();  // JSON string escaping
      break;
    case json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& item : v) {
        if (!first) out += ',';
        first = false;
        dump(item, out);
      }
      out += ']';
      break;
    }
    case json::value_t::object: {
      // nlohmann's default object storage is a std::map, already key-sorted.
      out += '{';
      bool first = true;
      for (const auto& [key, value] : v.items()) {
        if (!first) out += ',';
        first = false;
        out += json(key).dump();
        out += ':';
        dump(value, out);
      }
      out += '}';
      break;
    }
    default:
      throw validation_error("canonical json: unsupported value type");
  }
}

}  // namespace canon_detail

inline std::string canonical_dump(const json& v) {
  std::string out;
  canon_detail::dump(v, out);
  out += '\n';
  return out;
}

}  // namespace specprobe
