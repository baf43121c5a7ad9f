#pragma once

#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <cstdlib>
#include <string>

namespace joris {

/// Arbitrary-precision real with runtime-selectable mantissa.
using Real = boost::multiprecision::mpfr_float;

inline constexpr unsigned kDefaultPrecisionBits = 256;
inline constexpr unsigned kGalleryPrecisionBits = 512;

/// Mantissa bits for extended-precision work. `JORIS_PRECISION_BITS`
/// overrides the default when set to an integer >= 64.
inline unsigned precision_bits(unsigned fallback = kDefaultPrecisionBits) {
  if (const char* env = std::getenv("JORIS_PRECISION_BITS")) {
    char* end = nullptr;
    long bits = std::strtol(env, &end, 10);
    if (end != env && bits >= 64 && bits <= 1 << 16) return static_cast<unsigned>(bits);
  }
  return fallback;
}

inline unsigned bits_to_digits10(unsigned bits) {
  return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120)) + 1;
}

/// Sets the default mpfr precision for its lifetime.
class ScopedPrecision {
 public:
  explicit ScopedPrecision(unsigned bits)
      : saved_(Real::default_precision()) {
    Real::default_precision(bits_to_digits10(bits));
  }
  ScopedPrecision(const ScopedPrecision&) = delete;
  ScopedPrecision& operator=(const ScopedPrecision&) = delete;
  ~ScopedPrecision() { Real::default_precision(saved_); }

 private:
  unsigned saved_;
};

namespace detail {
inline const bool precision_initialized = [] {
  Real::default_precision(bits_to_digits10(precision_bits()));
  return true;
}();
}  // namespace detail

inline Real make_real(double v) { return Real(v); }

/// ln Gamma(x) at the precision of x (x > 0).
inline Real lgamma_real(const Real& x) {
  Real out;
  out.precision(x.precision());
  int sign = 0;
  mpfr_lgamma(out.backend().data(), &sign, x.backend().data(), MPFR_RNDN);
  return out;
}

inline std::string to_string(const Real& v, int digits = 20) {
  return v.str(digits, std::ios_base::scientific);
}

}  // namespace joris
