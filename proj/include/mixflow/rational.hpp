#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mixflow {

// Exact rational arithmetic over 128-bit integers. Layer times and group
// times are ratios of large integer products (feature-map elements times
// channels over parallelism factors); keeping them exact lets tests assert
// pipeline balance as true equality instead of an epsilon compare.
class Rational {
 public:
  using Int = __int128;

  Rational() : num_(0), den_(1) {}
  Rational(Int n) : num_(n), den_(1) {}  // NOLINT: implicit from integers is intended
  Rational(std::int64_t n) : num_(n), den_(1) {}
  Rational(int n) : num_(n), den_(1) {}
  Rational(Int n, Int d) : num_(n), den_(d) {
    if (den_ == 0) throw std::domain_error("Rational: zero denominator");
    normalize();
  }

  static Rational ratio(std::int64_t n, std::int64_t d) { return Rational(Int(n), Int(d)); }

  Int num() const { return num_; }
  Int den() const { return den_; }

  bool is_integer() const { return den_ == 1; }
  bool is_zero() const { return num_ == 0; }

  Rational operator+(const Rational& o) const {
    const Int g = gcd_i(den_, o.den_);
    const Int num = num_ * (o.den_ / g) + o.num_ * (den_ / g);
    return Rational(num, (den_ / g) * o.den_);
  }
  Rational operator-(const Rational& o) const { return *this + Rational(-o.num_, o.den_); }
  Rational operator*(const Rational& o) const {
    // Cross-reduce before multiplying to keep intermediates small.
    const Int g1 = gcd_i(abs_i(num_), o.den_);
    const Int g2 = gcd_i(abs_i(o.num_), den_);
    return Rational((num_ / g1) * (o.num_ / g2), (den_ / g2) * (o.den_ / g1));
  }
  Rational operator/(const Rational& o) const {
    if (o.num_ == 0) throw std::domain_error("Rational: division by zero");
    return *this * Rational(o.den_, o.num_);
  }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
  bool operator!=(const Rational& o) const { return !(*this == o); }
  bool operator<(const Rational& o) const { return num_ * o.den_ < o.num_ * den_; }
  bool operator>(const Rational& o) const { return o < *this; }
  bool operator<=(const Rational& o) const { return !(o < *this); }
  bool operator>=(const Rational& o) const { return !(*this < o); }

  Rational abs() const { return Rational(abs_i(num_), den_); }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  // Smallest integer >= value. Used when exact cycle counts are reported.
  std::int64_t ceil_int() const {
    Int q = num_ / den_;
    if (num_ % den_ != 0 && num_ > 0) ++q;
    return static_cast<std::int64_t>(q);
  }

  std::string str() const;  // decimal, 6 significant digits

 private:
  static Int abs_i(Int v) { return v < 0 ? -v : v; }
  static Int gcd_i(Int a, Int b) {
    a = abs_i(a);
    b = abs_i(b);
    while (b != 0) {
      const Int t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }
  void normalize() {
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    const Int g = gcd_i(num_, den_);
    num_ /= g;
    den_ /= g;
  }

  Int num_;
  Int den_;
};

}  // namespace mixflow
