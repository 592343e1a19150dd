#pragma once

#include <stdexcept>
#include <string>

namespace tpp {

enum class Errc {
  invalid_spec,
  shape_mismatch,
  dtype_mismatch,
  unsupported,
  out_of_bounds,
  flag_conflict,
  missing_companion,
  aliasing,
  parse_error,
  strategy_illegal,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool cond, Errc code, const char* what) {
  if (!cond) fail(code, what);
}

}  // namespace tpp
