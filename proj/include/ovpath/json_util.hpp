#pragma once

#include "ovpath/error.hpp"

#include <json.hpp>

#include <set>
#include <string>

namespace ovpath {

/// Reads fields from a JSON object, then rejects any key that was not read.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw Error(ErrorKind::ConfigError, context_ + ": expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError, context_ + "." + key + ": " + e.what());
    }
  }

  const nlohmann::json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw Error(ErrorKind::ConfigError, context_ + ": unknown key \"" + key + "\"");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace ovpath
