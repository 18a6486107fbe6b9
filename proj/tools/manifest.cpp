#include "manifest.hpp"

#include "jtanet/container.hpp"
#include "svg.hpp"

namespace jtanet::cli {

RunManifest::RunManifest(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

void RunManifest::input(const std::string& role, const std::filesystem::path& path) {
  nlohmann::json entry = {{"role", role}, {"path", path.string()}};
  if (std::filesystem::is_regular_file(path)) entry["fnv1a64"] = file_hash(path);
  inputs_.push_back(entry);
}

void RunManifest::output(const std::string& role, const std::filesystem::path& path) {
  outputs_.emplace_back(role, path);
}

void RunManifest::write(const std::filesystem::path& path) {
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& [role, p] : outputs_) {
    nlohmann::json entry = {{"role", role}, {"path", p.string()}};
    if (std::filesystem::is_regular_file(p)) entry["fnv1a64"] = file_hash(p);
    outputs.push_back(entry);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  nlohmann::json j = {{"command", command_}, {"seed", seed_},          {"config", config_},
                      {"inputs", inputs_},   {"outputs", outputs},     {"checkpoint", checkpoint_},
                      {"wall_seconds", secs}};
  write_text(path, j.dump(2) + "\n");
}

}  // namespace jtanet::cli
