#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "panelqboot/format.hpp"

// Minimal ordered JSON document used for report output. Keys keep insertion
// order and doubles print with 17 significant digits, so a report written
// twice from the same state is byte-identical.
namespace pqbtool {

class Json;
using JsonArray = std::vector<Json>;
using JsonObject = std::vector<std::pair<std::string, Json>>;

class Json {
 public:
  Json() : value_(nullptr) {}
  Json(std::nullptr_t) : value_(nullptr) {}
  Json(bool b) : value_(b) {}
  Json(double d) : value_(d) {}
  Json(int v) : value_(static_cast<std::int64_t>(v)) {}
  Json(std::int64_t v) : value_(v) {}
  Json(std::uint64_t v) : value_(v) {}
  Json(const char* s) : value_(std::string(s)) {}
  Json(std::string s) : value_(std::move(s)) {}
  Json(JsonArray a) : value_(std::move(a)) {}
  Json(JsonObject o) : value_(std::move(o)) {}

  // Object field append; only valid on object-valued nodes.
  Json& set(const std::string& key, Json v) {
    auto& obj = std::get<JsonObject>(value_);
    obj.emplace_back(key, std::move(v));
    return *this;
  }

  static Json object() { return Json(JsonObject{}); }
  static Json array() { return Json(JsonArray{}); }

  Json& push(Json v) {
    std::get<JsonArray>(value_).push_back(std::move(v));
    return *this;
  }

  void dump(std::string& out, int indent = 0) const {
    struct Visitor {
      std::string& out;
      int indent;
      void pad(int n) const { out.append(static_cast<std::size_t>(n), ' '); }
      void operator()(std::nullptr_t) const { out += "null"; }
      void operator()(bool b) const { out += b ? "true" : "false"; }
      void operator()(double d) const { out += panelqboot::fmt_g17(d); }
      void operator()(std::int64_t v) const { out += std::to_string(v); }
      void operator()(std::uint64_t v) const { out += std::to_string(v); }
      void operator()(const std::string& s) const {
        out += '"';
        for (char c : s) {
          switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
          }
        }
        out += '"';
      }
      void operator()(const JsonArray& a) const {
        if (a.empty()) {
          out += "[]";
          return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < a.size(); ++i) {
          pad(indent + 2);
          a[i].dump(out, indent + 2);
          out += i + 1 < a.size() ? ",\n" : "\n";
        }
        pad(indent);
        out += ']';
      }
      void operator()(const JsonObject& o) const {
        if (o.empty()) {
          out += "{}";
          return;
        }
        out += "{\n";
        for (std::size_t i = 0; i < o.size(); ++i) {
          pad(indent + 2);
          Visitor{out, indent + 2}(o[i].first);
          out += ": ";
          o[i].second.dump(out, indent + 2);
          out += i + 1 < o.size() ? ",\n" : "\n";
        }
        pad(indent);
        out += '}';
      }
    };
    std::visit(Visitor{out, indent}, value_);
  }

  std::string dump() const {
    std::string out;
    dump(out, 0);
    out += '\n';
    return out;
  }

 private:
  std::variant<std::nullptr_t, bool, double, std::int64_t, std::uint64_t,
               std::string, JsonArray, JsonObject>
      value_;
};

}  // namespace pqbtool
