#pragma once

#include "prefsdm/inference.hpp"
#include "prefsdm/samplers.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace prefsdm {

inline constexpr const char* kDatasetCsvHeader = "x,y,mark,a,split";

// <dir>/dataset.csv holds one row per training observation (split = train)
// and per held-out point (split = test, mark = noiseless surface value);
// <dir>/field.json holds the simulated field and generating constants.
void save_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

nlohmann::ordered_json to_json(const FieldRealization& f);
FieldRealization field_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const FitResult& f);

}  // namespace prefsdm
