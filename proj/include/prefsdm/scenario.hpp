#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace prefsdm {

// Constants shared by every scenario of a study. The defaults are assumptions:
// the simulated noise level, sharing coefficient and intercept are not fixed
// by the study design itself.
struct SimulationConstants {
  double eta = 0.0;
  double tau = 0.3;
  double alpha = 1.5;
  double sigma = 1.0;
  double nu = 1.0;
  int grid_nx = 16;
  int grid_ny = 16;
  int n_test = 400;
};

struct ScenarioSpec {
  double range = 0.5;
  double prop_random = 0.5;
  int n_total = 100;
  int replicate = 0;
  SimulationConstants sim;

  // Identifies the factor combination, excluding the replicate.
  std::string id() const;
};

// 64-bit seed from SHA-256 over a canonical text encoding of
// (master, factor levels, replicate, stream label).
std::uint64_t derive_seed(std::uint64_t master, const ScenarioSpec& sc, std::string_view stream);

}  // namespace prefsdm
