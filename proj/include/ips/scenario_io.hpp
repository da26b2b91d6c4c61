#pragma once

// JSON encoding of scenarios and simulator settings (the `scenario.json`
// sidecar written next to every simulated record stream).

#include <string>

#include <json.hpp>

#include "ips/simulator.hpp"

namespace ips {

nlohmann::ordered_json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

nlohmann::ordered_json sim_config_to_json(const SimConfig& config);
SimConfig sim_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json perturbation_to_json(const Perturbation& p);
Perturbation perturbation_from_json(const nlohmann::json& j);

/// Contents of `scenario.json`: both sessions plus the settings that
/// produced them.
struct DatasetManifest {
  Scenario dataset1;
  Scenario dataset2;
  SimConfig config1;
  SimConfig config2;
  Perturbation perturbation;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

void write_json_file(const std::string& path, const nlohmann::ordered_json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace ips
