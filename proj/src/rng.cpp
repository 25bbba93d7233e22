#include "prefsdm/rng.hpp"

#include <cmath>
#include <numbers>

namespace prefsdm {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double to_open_unit(std::uint64_t b) {
  return (static_cast<double>(b >> 11) + 0.5) * 0x1.0p-53;
}

double box_muller(double u1, double u2) {
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t key) : key_(finalize(key + kGolden)) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return finalize(key_ + (counter + 1) * kGolden);
}

double CounterRng::uniform(std::uint64_t counter) const { return to_open_unit(bits(counter)); }

double CounterRng::normal(std::uint64_t index) const {
  return box_muller(uniform(2 * index), uniform(2 * index + 1));
}

double RngStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return box_muller(u1, u2);
}

}  // namespace prefsdm
