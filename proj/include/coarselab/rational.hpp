#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace coarse {

using Int = boost::multiprecision::cpp_int;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

/** Exact rational, always normalized: gcd(num,den)=1, den>0. */
class Rat {
 public:
  Rat() : num_(0), den_(1) {}
  Rat(long long n) : num_(n), den_(1) {}  // NOLINT: implicit on purpose
  Rat(Int n) : num_(std::move(n)), den_(1) {}
  Rat(Int n, Int d) : num_(std::move(n)), den_(std::move(d)) { normalize(); }

  const Int& num() const { return num_; }
  const Int& den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_integer() const { return den_ == 1; }
  int sign() const { return num_ == 0 ? 0 : (num_ < 0 ? -1 : 1); }

  Rat operator-() const { return Rat(-num_, den_, tag{}); }
  Rat abs() const { return num_ < 0 ? -*this : *this; }

  friend Rat operator+(const Rat& a, const Rat& b) {
    return Rat(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
  }
  friend Rat operator-(const Rat& a, const Rat& b) {
    return Rat(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
  }
  friend Rat operator*(const Rat& a, const Rat& b) {
    return Rat(a.num_ * b.num_, a.den_ * b.den_);
  }
  friend Rat operator/(const Rat& a, const Rat& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return Rat(a.num_ * b.den_, a.den_ * b.num_);
  }
  Rat& operator+=(const Rat& o) { return *this = *this + o; }
  Rat& operator-=(const Rat& o) { return *this = *this - o; }
  Rat& operator*=(const Rat& o) { return *this = *this * o; }
  Rat& operator/=(const Rat& o) { return *this = *this / o; }

  friend bool operator==(const Rat& a, const Rat& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rat& a, const Rat& b) { return !(a == b); }
  friend bool operator<(const Rat& a, const Rat& b) {
    return a.num_ * b.den_ < b.num_ * a.den_;
  }
  friend bool operator>(const Rat& a, const Rat& b) { return b < a; }
  friend bool operator<=(const Rat& a, const Rat& b) { return !(b < a); }
  friend bool operator>=(const Rat& a, const Rat& b) { return !(a < b); }

  /** Largest integer <= value. */
  Int floor() const {
    Int q = num_ / den_;
    if (num_ < 0 && q * den_ != num_) --q;
    return q;
  }
  Int ceil() const { return -((-*this).floor()); }
  long long floor_ll() const { return floor().convert_to<long long>(); }
  long long ceil_ll() const { return ceil().convert_to<long long>(); }

  /** Canonical form "p/q" (q always printed so records stay unambiguous). */
  std::string str() const {
    return num_.str() + "/" + den_.str();
  }

  /** Accepts "p/q" or a bare integer "p". */
  static Rat parse(const std::string& s) {
    auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return Rat(Int(s), Int(1));
      return Rat(Int(s.substr(0, slash)), Int(s.substr(slash + 1)));
    } catch (const std::exception&) {
      throw ConfigError("bad rational literal: '" + s + "'");
    }
  }

  /** Deterministic decimal rendering with `digits` places, round half away from zero. */
  std::string decimal(int digits) const {
    Int p = num_ < 0 ? Int(-num_) : num_;
    Int scale = 1;
    for (int i = 0; i < digits; ++i) scale *= 10;
    Int v = (p * scale * 2 + den_) / (den_ * 2);  // rounded
    Int ip = v / scale, fp = v % scale;
    std::string frac = fp.str();
    if (static_cast<int>(frac.size()) < digits)
      frac.insert(frac.begin(), digits - static_cast<int>(frac.size()), '0');
    std::string out = (num_ < 0 && v != 0 ? "-" : "") + ip.str();
    if (digits > 0) out += "." + frac;
    return out;
  }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

 private:
  struct tag {};
  Rat(Int n, Int d, tag) : num_(std::move(n)), den_(std::move(d)) {}
  void normalize() {
    if (den_ == 0) throw std::domain_error("rational with zero denominator");
    if (den_ < 0) { num_ = -num_; den_ = -den_; }
    Int g = boost::multiprecision::gcd(num_ < 0 ? Int(-num_) : num_, den_);
    if (g > 1) { num_ /= g; den_ /= g; }
    if (num_ == 0) den_ = 1;
  }
  Int num_, den_;
};

inline Rat min(const Rat& a, const Rat& b) { return a < b ? a : b; }
inline Rat max(const Rat& a, const Rat& b) { return a < b ? b : a; }

}  // namespace coarse
