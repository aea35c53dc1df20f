#pragma once

#include "sorl/datagen.hpp"
#include "sorl/mdp.hpp"
#include "sorl/regression.hpp"

#include <json.hpp>

#include <string>

namespace sorl {

using json = nlohmann::json;

// JSON documents use sorted keys and shortest round-trip doubles.

json to_json(const SparseLinearMdp& m);
SparseLinearMdp mdp_from_json(const json& j);

/// {"kind": "tabular"|"log_linear"|"greedy"|"mixture", ...}
json to_json(const Policy& p);
Policy policy_from_json(const json& j);

json to_json(const EstimatorReport& r);

/// JSON Lines: a provenance header, then one {"steps":[[x,a,R],...],"corrupted":b} per trajectory.
std::string dataset_to_jsonl(const Dataset& ds);
Dataset dataset_from_jsonl(const std::string& text);

std::string mdp_hash(const SparseLinearMdp& m);
std::string policy_hash(const Policy& p);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace sorl
