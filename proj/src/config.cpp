#include "prefcf/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>

#include "prefcf/error.hpp"

namespace prefcf {
namespace {

constexpr std::array<std::string_view, 26> kKeys{
    "model",       "seed",        "scale",         "k_x",
    "k_p",         "k_r",         "k_pref",        "am_k",
    "bc_k",        "mp_k_y",      "mp_k_x",        "mp_max_pairs",
    "sigma",       "alpha",       "mode",          "anneal",
    "beta_start",  "beta_growth", "beta_max",      "inner_iters_per_beta",
    "max_iters",   "tol",         "fold_in_max_iters", "fold_in_tol",
    "given_selection", "perturbation"};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("config key '" + std::string(key) + "': expected " + expected + ", got '" +
                    std::string(value) + "'");
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    bad(key, v, "a non-negative integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out))
    bad(key, v, "a number");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "true or false");
}

}  // namespace

std::span<const std::string_view> config_keys() { return kKeys; }

void RunConfig::validate() const {
  params.validate();
  if (scale < 0) throw ConfigError("scale must be non-negative");
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  auto& p = c.params;
  const auto sz = [&] { return static_cast<std::size_t>(to_uint(key, value)); };
  const auto schedule = [&]() -> AnnealSchedule& {
    if (!p.schedule) p.schedule = AnnealSchedule{};
    return *p.schedule;
  };
  try {
    if (key == "model") c.model = parse_model_kind(value);
    else if (key == "seed") c.seed = to_uint(key, value);
    else if (key == "scale") c.scale = static_cast<int>(to_uint(key, value));
    else if (key == "k_x") p.dm.k_x = sz();
    else if (key == "k_p") p.dm.k_p = sz();
    else if (key == "k_r") p.dm.k_r = sz();
    else if (key == "k_pref") p.dm.k_pref = sz();
    else if (key == "am_k") p.am_k = sz();
    else if (key == "bc_k") p.bc_k = sz();
    else if (key == "mp_k_y") p.mp_k_y = sz();
    else if (key == "mp_k_x") p.mp_k_x = sz();
    else if (key == "mp_max_pairs") p.mp_max_pairs = sz();
    else if (key == "sigma") p.sigma = to_double(key, value);
    else if (key == "alpha") p.alpha = to_double(key, value);
    else if (key == "mode") p.mode = parse_predict_mode(value);
    else if (key == "anneal") {
      if (to_bool(key, value)) schedule();
      else p.schedule.reset();
    }
    else if (key == "beta_start") schedule().beta_start = to_double(key, value);
    else if (key == "beta_growth") schedule().beta_growth = to_double(key, value);
    else if (key == "beta_max") schedule().beta_max = to_double(key, value);
    else if (key == "perturbation") schedule().perturbation = to_double(key, value);
    else if (key == "inner_iters_per_beta") schedule().inner_iters_per_beta = sz();
    else if (key == "max_iters") p.criterion.max_iters = sz();
    else if (key == "tol") p.criterion.rel_loglik_tol = to_double(key, value);
    else if (key == "fold_in_max_iters") p.fold_in.max_iters = sz();
    else if (key == "fold_in_tol") p.fold_in.rel_loglik_tol = to_double(key, value);
    else if (key == "given_selection") {
      if (value == "first-in-file") c.given_selection = GivenSelection::first_in_file;
      else if (value == "seeded-random") c.given_selection = GivenSelection::seeded_random;
      else bad(key, value, "first-in-file or seeded-random");
    }
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("config key '" + std::string(key) + "': " + e.what());
  }
}

void apply_assignment(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void parse_config(RunConfig& config, std::istream& in) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    try {
      apply_assignment(config, s);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  parse_config(config, in);
}

}  // namespace prefcf
