#pragma once
// Flat key=value run configuration. '#' starts a comment; blank lines are
// ignored. Command-line --set overrides are applied after the file.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefcf/recommender.hpp"

namespace prefcf {

struct RunConfig {
  ModelKind model = ModelKind::dm;
  ModelConfig params{};
  std::uint64_t seed = 42;
  int scale = 0;  // 0: infer from the data
  GivenSelection given_selection = GivenSelection::first_in_file;

  void validate() const;
};

// Every accepted key, in a stable order.
std::span<const std::string_view> config_keys();

// Throws ConfigError naming the key for an unknown key or a malformed value.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
// "key=value".
void apply_assignment(RunConfig& config, std::string_view assignment);

void parse_config(RunConfig& config, std::istream& in);
void load_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace prefcf
