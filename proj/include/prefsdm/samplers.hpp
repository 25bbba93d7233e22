#pragma once

#include "prefsdm/scenario.hpp"
#include "prefsdm/spatial_field.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace prefsdm {

using Locations = std::vector<Point>;

// One training datum. a = 1 marks a preferentially sampled location,
// a = 0 a completely random one.
struct Observation {
  Point location;
  double y = 0.0;
  int a = 0;

  bool operator==(const Observation&) const = default;
};

// Held-out location with the noiseless surface value eta + u(s).
struct TestPoint {
  Point location;
  double truth = 0.0;
};

struct SimParams {
  double eta = 0.0;
  double tau = 0.3;
  double alpha = 1.5;
  MaternParams field;
};

struct Dataset {
  std::vector<Observation> train;
  std::vector<TestPoint> test;
  std::optional<FieldRealization> truth;
  SimParams sim;

  int count_preferential() const;
  int count_random() const { return static_cast<int>(train.size()) - count_preferential(); }
  void validate() const;
};

Locations uniform_points(int n, const GridSpec& grid, std::uint64_t seed);

// Fixed-count draw from the density proportional to exp(alpha * u(s)), by
// rejection against the node maximum of alpha * u.
Locations preferential_points(int n, const FieldRealization& f, double alpha, std::uint64_t seed);

std::vector<double> generate_marks(const Locations& locs, const FieldRealization& f, double eta,
                                   double tau, std::uint64_t seed);

// Round-half-up of n * (1 - prop_random).
int preferential_count(int n_total, double prop_random);

Dataset make_dataset(const ScenarioSpec& sc, std::uint64_t master_seed);

}  // namespace prefsdm
