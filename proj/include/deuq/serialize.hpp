#pragma once

// JSON forms of configurations, stage-1 results and fitted posteriors, plus
// atomic file writes.

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "deuq/mlp.hpp"
#include "deuq/stage1.hpp"
#include "deuq/uq.hpp"

namespace deuq {

using json = nlohmann::json;

void to_json(json& j, const MLPConfig& c);
void from_json(const json& j, MLPConfig& c);
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);

// {problem, net_config, train_config, flat_params, loss_history, dataset}
json stage1_to_json(const Stage1Result& r);
Stage1Result stage1_from_json(const json& j);

json variational_to_json(const VariationalParams& q);
VariationalParams variational_from_json(const json& j);

json nlm_to_json(const NLMPosterior& post);
NLMPosterior nlm_from_json(const json& j);

json der_to_json(const DERModel& model);
DERModel der_from_json(const json& j);

// Writes to a sibling temporary file and renames it into place. IoError on
// failure.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);

}  // namespace deuq
