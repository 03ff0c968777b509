#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "prnulab/error.hpp"

#ifndef PRNULAB_VERSION
#define PRNULAB_VERSION "0.0.0"
#endif

namespace prnulab {

inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::string config_digest;
  std::string tool_version = PRNULAB_VERSION;
  std::uint64_t seed = 0;
  std::string started_at = utc_timestamp();
  std::string finished_at;
  std::vector<std::string> outputs;
  nlohmann::json settings = nlohmann::json::object();  // effective parameters, defaults included
  std::vector<std::string> defaulted;                  // fields the config left out

  nlohmann::json to_json() const {
    return {{"command", command},         {"arguments", arguments},   {"config_digest", config_digest},
            {"tool_version", tool_version}, {"seed", seed},             {"started_at", started_at},
            {"finished_at", finished_at}, {"outputs", outputs},       {"settings", settings},
            {"defaulted", defaulted}};
  }

  // Stamps the finish time and writes the manifest; every listed output must exist.
  void write(const std::filesystem::path& path) {
    for (const auto& o : outputs)
      if (!std::filesystem::exists(o)) throw Error(ErrorKind::io, "manifest output '" + o + "' was not written");
    finished_at = utc_timestamp();
    outputs.push_back(path.string());
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    out << to_json().dump(2) << "\n";
  }
};

}  // namespace prnulab
