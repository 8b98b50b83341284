#pragma once

#include <compare>
#include <cstdint>

namespace kfdp {

// Non-negative ratio with integer parts. Bounds are compared exactly, so the
// fraction is kept unreduced (numerator is a count, denominator max{1,|R|}).
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend std::strong_ordering operator<=>(const Fraction& a, const Fraction& b) {
    return a.num * b.den <=> b.num * a.den;
  }
  friend bool operator==(const Fraction& a, const Fraction& b) {
    return a.num * b.den == b.num * a.den;
  }
};

}  // namespace kfdp
