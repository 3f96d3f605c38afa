#pragma once

#include <filesystem>
#include <string>

#include "ttgoals/bootstrap.hpp"
#include "ttgoals/ssp.hpp"

namespace ttgoals::config {

/// Demo-source settings: the scripted demonstrator plus the ES alternative.
struct BootstrapConfig {
  bootstrap::DemonstratorConfig demonstrator;
  bootstrap::EsConfig es;
  bootstrap::FitnessSpec fitness;
  int es_hidden = 8;
  int max_attempts = 1000000;
};

/// The whole run config file. Sections: physics, robot, env, train, ssp,
/// eval and the optional bootstrap; `seed` sits at the top level.
struct Config {
  ssp::RunConfig run;
  BootstrapConfig bootstrap;
};

/// Parses a config document. Missing keys keep their defaults; unknown keys
/// and ill-typed values throw ConfigError naming the offending path.
Config parse_config(const std::string& text);

/// Reads and parses `path`, then applies the TTGOALS_SEED override.
Config load_config(const std::filesystem::path& path);

/// Replaces the seed with TTGOALS_SEED when that variable is set.
void apply_seed_override(Config& cfg);

/// Full document with every field spelled out; parse_config round-trips it.
std::string dump_config(const Config& cfg);

}  // namespace ttgoals::config
