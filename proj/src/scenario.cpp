#include "prefsdm/scenario.hpp"

#include "prefsdm/error.hpp"

#include <openssl/sha.h>

#include <cstdio>

namespace prefsdm {

std::string ScenarioSpec::id() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "range=%.3f;prop=%.3f;n=%d", range, prop_random, n_total);
  return buf;
}

std::uint64_t derive_seed(std::uint64_t master, const ScenarioSpec& sc, std::string_view stream) {
  char head[160];
  const int len = std::snprintf(head, sizeof head, "prefsdm-seed-v1|%llu|%.17g|%.17g|%d|%d|",
                                static_cast<unsigned long long>(master), sc.range,
                                sc.prop_random, sc.n_total, sc.replicate);
  if (len <= 0 || len >= static_cast<int>(sizeof head)) {
    fail(Errc::numeric, "seed derivation buffer overflow");
  }
  std::string message(head, static_cast<std::size_t>(len));
  message.append(stream);

  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(message.data()), message.size(), digest);
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | digest[i];
  return seed;
}

}  // namespace prefsdm
