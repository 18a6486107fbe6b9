#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include "json.hpp"

namespace jtanet::cli {

/// Record of one command invocation: what went in, what came out.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed);

  nlohmann::json& config() { return config_; }
  void input(const std::string& role, const std::filesystem::path& path);
  void output(const std::string& role, const std::filesystem::path& path);
  void set_checkpoint(const std::filesystem::path& path) { checkpoint_ = path.string(); }

  /// Fills in output hashes and elapsed time, then writes pretty JSON.
  void write(const std::filesystem::path& path);

 private:
  std::string command_;
  std::uint64_t seed_;
  std::string checkpoint_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  std::vector<std::pair<std::string, std::filesystem::path>> outputs_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace jtanet::cli
