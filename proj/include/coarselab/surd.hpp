#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "coarselab/rational.hpp"

namespace coarse {

/**
 * Exact value of the form  q0 + sum_i c_i * sqrt(s_i)  with rational q0, c_i
 * and distinct squarefree integer radicands s_i >= 2.
 *
 * This is the value domain for derived metrics: word distances stay pure
 * rationals, the concave derivation contributes single square roots, and
 * sums/differences of a few such values show up in triangle and chain checks.
 * Equality is decidable coefficient-wise (square roots of distinct squarefree
 * integers are linearly independent over Q); strict comparison falls back to
 * rational interval refinement, which terminates because a nonzero value is
 * bounded away from zero.
 */
class Surd {
 public:
  Surd() = default;
  Surd(Rat q) : q_(std::move(q)) {}  // NOLINT: implicit on purpose
  Surd(long long q) : q_(Rat(q)) {}  // NOLINT

  /** sqrt(r) for rational r >= 0, exact. */
  static Surd sqrt(const Rat& r) {
    if (r.sign() < 0) throw std::domain_error("sqrt of negative rational");
    if (r.is_zero()) return Surd();
    // sqrt(p/q) = sqrt(p*q)/q
    Int pq = r.num() * r.den();
    auto [sf, sq] = squarefree_split(pq);
    Rat coeff(sq, r.den());
    if (sf == 1) return Surd(coeff);
    Surd out;
    out.roots_[checked_ll(sf)] = coeff;
    return out;
  }

  const Rat& rational_part() const { return q_; }
  bool is_rational() const { return roots_.empty(); }
  /** Value as a rational; throws if irrational. */
  const Rat& as_rational() const {
    if (!roots_.empty()) throw std::domain_error("surd value is irrational");
    return q_;
  }

  friend Surd operator+(const Surd& a, const Surd& b) {
    Surd out = a;
    out.q_ += b.q_;
    for (const auto& [s, c] : b.roots_) {
      Rat& slot = out.roots_[s];
      slot += c;
      if (slot.is_zero()) out.roots_.erase(s);
    }
    return out;
  }
  friend Surd operator-(const Surd& a, const Surd& b) { return a + (-b); }
  Surd operator-() const {
    Surd out;
    out.q_ = -q_;
    for (const auto& [s, c] : roots_) out.roots_[s] = -c;
    return out;
  }
  friend Surd operator*(const Rat& k, const Surd& a) {
    if (k.is_zero()) return Surd();
    Surd out;
    out.q_ = k * a.q_;
    for (const auto& [s, c] : a.roots_) out.roots_[s] = k * c;
    return out;
  }
  friend Surd operator*(const Surd& a, const Surd& b) {
    Surd out(a.q_ * b.q_);
    auto add_root = [&out](long long s, const Rat& c) {
      if (c.is_zero()) return;
      if (s == 1) {
        out.q_ += c;
        return;
      }
      Rat& slot = out.roots_[s];
      slot += c;
      if (slot.is_zero()) out.roots_.erase(s);
    };
    for (const auto& [s, c] : b.roots_) add_root(s, a.q_ * c);
    for (const auto& [s, c] : a.roots_) add_root(s, b.q_ * c);
    // sqrt(s)·sqrt(t) = gcd·sqrt((s/g)(t/g)); s/g, t/g coprime squarefree
    for (const auto& [sa, ca] : a.roots_)
      for (const auto& [sb, cb] : b.roots_) {
        long long g = std::gcd(sa, sb);
        long long u = checked_ll(Int(sa / g) * Int(sb / g));
        add_root(u, ca * cb * Rat(g));
      }
    return out;
  }
  Surd& operator+=(const Surd& o) { return *this = *this + o; }
  Surd& operator-=(const Surd& o) { return *this = *this - o; }
  Surd& operator*=(const Surd& o) { return *this = *this * o; }

  int sign() const {
    if (roots_.empty()) return q_.sign();
    // Interval refinement; exact zero was already excluded by representation
    // (a value with root terms is irrational, hence nonzero).
    for (int bits = 16; bits <= 1024; bits *= 2) {
      auto [lo, hi] = bounds(bits);
      if (lo.sign() > 0) return 1;
      if (hi.sign() < 0) return -1;
    }
    throw std::logic_error("surd sign refinement did not converge");
  }

  friend bool operator==(const Surd& a, const Surd& b) {
    return a.q_ == b.q_ && a.roots_ == b.roots_;
  }
  friend bool operator!=(const Surd& a, const Surd& b) { return !(a == b); }
  friend bool operator<(const Surd& a, const Surd& b) {
    if (a == b) return false;
    return (a - b).sign() < 0;
  }
  friend bool operator>(const Surd& a, const Surd& b) { return b < a; }
  friend bool operator<=(const Surd& a, const Surd& b) { return !(b < a); }
  friend bool operator>=(const Surd& a, const Surd& b) { return !(a < b); }

  Surd abs() const { return sign() < 0 ? -*this : *this; }

  /** Canonical text form, e.g. "3/1", "3/1+1/1*sqrt(2)", "-1/2*sqrt(6)". */
  std::string str() const {
    std::string out;
    if (!q_.is_zero() || roots_.empty()) out = q_.str();
    for (const auto& [s, c] : roots_) {
      if (!out.empty() && c.sign() > 0) out += "+";
      out += c.str() + "*sqrt(" + std::to_string(s) + ")";
    }
    return out;
  }

  /** Deterministic decimal approximation with `digits` places. */
  std::string decimal(int digits) const {
    if (roots_.empty()) return q_.decimal(digits);
    for (int bits = 64; bits <= 1024; bits *= 2) {
      auto [lo, hi] = bounds(bits);
      std::string a = lo.decimal(digits), b = hi.decimal(digits);
      if (a == b) return a;
    }
    return bounds(1024).first.decimal(digits);
  }

  double to_double() const {
    auto [lo, hi] = bounds(64);
    return (lo.to_double() + hi.to_double()) / 2;
  }

  /** Rational enclosure [lo, hi] of the value, width shrinking with `bits`. */
  std::pair<Rat, Rat> bounds(int bits) const {
    Rat lo = q_, hi = q_;
    Int scale = Int(1) << bits;
    Int scale2 = scale * scale;
    for (const auto& [s, c] : roots_) {
      // sqrt(s) in [r, r+1]/2^bits with r = isqrt(s * 4^bits)
      Int r = boost::multiprecision::sqrt(Int(s) * scale2);
      Rat root_lo(r, scale), root_hi(r + 1, scale);
      if (c.sign() > 0) {
        lo += c * root_lo;
        hi += c * root_hi;
      } else {
        lo += c * root_hi;
        hi += c * root_lo;
      }
    }
    return {lo, hi};
  }

 private:
  static long long checked_ll(const Int& v) {
    if (v > Int(std::numeric_limits<long long>::max()))
      throw std::overflow_error("radicand too large");
    return static_cast<long long>(v);
  }

  /** n = s * f^2 with s squarefree; returns (s, f). Trial division. */
  static std::pair<Int, Int> squarefree_split(Int n) {
    if (n <= 0) throw std::domain_error("squarefree_split needs positive input");
    Int s = 1, f = 1;
    for (Int p = 2; p * p <= n; ++p) {
      if (n % p != 0) continue;
      int e = 0;
      while (n % p == 0) { n /= p; ++e; }
      for (int i = 0; i < e / 2; ++i) f *= p;
      if (e % 2) s *= p;
    }
    s *= n;  // leftover prime
    return {s, f};
  }

  Rat q_;
  std::map<long long, Rat> roots_;
};

inline Surd min(const Surd& a, const Surd& b) { return a < b ? a : b; }
inline Surd max(const Surd& a, const Surd& b) { return a < b ? b : a; }

}  // namespace coarse
