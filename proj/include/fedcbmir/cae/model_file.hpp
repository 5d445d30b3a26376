#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fedcbmir/cae/config.hpp"
#include "fedcbmir/cae/model.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/fed/serialize.hpp"
#include "fedcbmir/io.hpp"

namespace fedcbmir {

inline nlohmann::json config_to_json(const CaeConfig& c) {
  return {{"channels", c.channels},
          {"height", c.height},
          {"width", c.width},
          {"encoder_filters", c.encoder_filters},
          {"residual_filters", c.residual_filters},
          {"bottleneck_dim", c.bottleneck_dim},
          {"decoder_filters", c.decoder_filters},
          {"seed", c.seed}};
}

inline CaeConfig config_from_json(const nlohmann::json& j) {
  CaeConfig c;
  try {
    c.channels = j.at("channels").get<std::size_t>();
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.encoder_filters = j.at("encoder_filters").get<std::vector<std::size_t>>();
    c.residual_filters = j.at("residual_filters").get<std::vector<std::size_t>>();
    c.bottleneck_dim = j.at("bottleneck_dim").get<std::size_t>();
    c.decoder_filters = j.at("decoder_filters").get<std::vector<std::size_t>>();
    c.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::filesystem::path config_sidecar(const std::filesystem::path& model_path) {
  return model_path.string() + ".config.json";
}

// A model on disk: FCWB weight blob plus `<path>.config.json`.
inline void save_model(const std::filesystem::path& path, const CaeModel<float>& model) {
  write_file(path, serialize_weights(model.weights()));
  write_text(config_sidecar(path), config_to_json(model.config()).dump(2) + "\n");
}

inline CaeModel<float> load_model(const std::filesystem::path& path) {
  const auto side = config_sidecar(path);
  if (!std::filesystem::exists(side)) throw IoError("missing model config " + side.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(side));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(side.string() + ": " + e.what());
  }
  const auto cfg = config_from_json(j);
  auto model = CaeModel<float>::zeros(cfg);
  model.load(deserialize_weights(read_file(path), model.layout_id()));
  return model;
}

}  // namespace fedcbmir
