#pragma once

#include <cmath>
#include <limits>
#include <string>

namespace sbolza {

// Tagged extended real. Function values of proper convex functions never
// carry neg_inf; value functions and Hamiltonians may.
class ExtReal {
 public:
  enum class Kind { finite, pos_inf, neg_inf };

  ExtReal() = default;
  ExtReal(double v) : kind_(Kind::finite), v_(v) {}  // NOLINT(implicit)

  static ExtReal pos_inf() { return ExtReal(Kind::pos_inf); }
  static ExtReal neg_inf() { return ExtReal(Kind::neg_inf); }

  Kind kind() const { return kind_; }
  bool finite() const { return kind_ == Kind::finite; }
  bool is_pos_inf() const { return kind_ == Kind::pos_inf; }
  bool is_neg_inf() const { return kind_ == Kind::neg_inf; }

  double value() const { return v_; }

  // +inf / -inf mapped onto IEEE infinities for arithmetic convenience.
  double as_double() const {
    switch (kind_) {
      case Kind::pos_inf: return std::numeric_limits<double>::infinity();
      case Kind::neg_inf: return -std::numeric_limits<double>::infinity();
      default: return v_;
    }
  }

  static ExtReal from_double(double v) {
    if (v == std::numeric_limits<double>::infinity()) return pos_inf();
    if (v == -std::numeric_limits<double>::infinity()) return neg_inf();
    return ExtReal(v);
  }

  std::string str() const {
    if (kind_ == Kind::pos_inf) return "+inf";
    if (kind_ == Kind::neg_inf) return "-inf";
    return std::to_string(v_);
  }

 private:
  explicit ExtReal(Kind k) : kind_(k) {}
  Kind kind_ = Kind::finite;
  double v_ = 0.0;
};

inline ExtReal operator+(const ExtReal& a, const ExtReal& b) {
  if (a.is_pos_inf() || b.is_pos_inf()) return ExtReal::pos_inf();
  if (a.is_neg_inf() || b.is_neg_inf()) return ExtReal::neg_inf();
  return ExtReal(a.value() + b.value());
}

}  // namespace sbolza
