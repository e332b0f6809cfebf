#pragma once

#include <json.hpp>

#include <filesystem>

#include "re2re/losses.hpp"
#include "re2re/separator.hpp"
#include "re2re/synthdata.hpp"
#include "re2re/trainer.hpp"

// JSON mapping for every config struct. Readers are strict: unknown keys and
// wrongly typed values raise ValidationError naming the offending field.
// Missing keys keep their defaults.

namespace re2re {

nlohmann::json to_json(const SeparatorConfig& c);
nlohmann::json to_json(const LossConfig& c);
nlohmann::json to_json(const CorpusSpec& c);
nlohmann::json to_json(const TrainConfig& c);

SeparatorConfig separator_config_from_json(const nlohmann::json& j, const std::string& where = "model");
LossConfig loss_config_from_json(const nlohmann::json& j, const std::string& where = "loss");
CorpusSpec corpus_spec_from_json(const nlohmann::json& j, const std::string& where = "");
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& where = "");

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace re2re
