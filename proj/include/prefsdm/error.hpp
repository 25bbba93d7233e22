#pragma once

#include <stdexcept>
#include <string>

namespace prefsdm {

enum class Errc {
  invalid_argument = 1,
  domain,
  out_of_bounds,
  numeric,
  factorization,
  io,
  config,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace prefsdm
