#pragma once

#include "prefsdm/inference.hpp"
#include "prefsdm/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace prefsdm {

struct ExperimentConfig {
  std::string profile = "desk";
  std::vector<double> ranges;
  std::vector<double> prop_random;
  std::vector<int> n_total;
  int replicates = 4;
  std::uint64_t master_seed = 20240611;
  SimulationConstants sim;
  InferenceConfig inference;
  int waic_draws = 1000;
  bool archive_datasets = false;
  int jobs = 1;

  // Factor levels of the study tables, four replicates each.
  static ExperimentConfig full();
  // Corner levels only: range {0.2, 0.8} x prop {0.1, 0.9} x n {60, 200}.
  static ExperimentConfig desk();
  static ExperimentConfig for_profile(std::string_view profile);

  void validate() const;
  // Canonical flat key = value document; parse_config(to_text()) round-trips.
  std::string to_text() const;
  std::string hash() const;
};

// Overlays the keys of a flat key = value document on the profile named by its
// `profile` key (or `base` when absent). Unknown keys are config errors.
ExperimentConfig parse_config(std::string_view text, std::string_view base = "desk");
ExperimentConfig load_config(const std::filesystem::path& path, std::string_view base = "desk");

std::string sha256_hex(std::string_view data);

}  // namespace prefsdm
