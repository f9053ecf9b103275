// Standard univariate and bivariate Gaussian kernels.
//
// Integration limits are plain doubles where +/-infinity is a legal value;
// no finite sentinel is ever used for an unbounded limit.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

namespace ordprobit {

/// Extended-real integration limit; +/-infinity are first-class values.
using Limit = double;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Largest admissible |rho|. The conditional-CDF identities divide by
/// sqrt(1 - rho^2), so values closer to +/-1 are rejected.
inline constexpr double kMaxAbsRho = 1.0 - 1e-6;

/// A correlation coefficient strictly inside (-1, 1).
class Rho {
 public:
  explicit Rho(double value) : value_(value) {
    if (!(std::abs(value) <= kMaxAbsRho)) {
      throw std::domain_error("correlation " + std::to_string(value) +
                              " outside [-(1-1e-6), 1-1e-6]");
    }
  }
  double value() const { return value_; }

 private:
  double value_;
};

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_cdf(Limit x) {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Inverse of norm_cdf (Wichura's AS 241, PPND16), refined by one Halley step.
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("norm_quantile: probability " + std::to_string(p) +
                            " outside (0, 1)");
  }
  const double q = p - 0.5;
  double x;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    x = q *
        (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r +
              67265.770927008700853) * r + 45921.953931549871457) * r +
            13731.693765509461125) * r + 1971.5909503065514427) * r +
          133.14166789178437745) * r + 3.387132872796366608) /
        (((((((r * 5226.495278852545925 + 28729.085735721942674) * r +
              39307.89580009271061) * r + 21213.794301586595867) * r +
            5394.1960214247511077) * r + 687.1870074920579083) * r +
          42.313330701600911252) * r + 1.0);
  } else {
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      x = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
    } else {
      r -= 5.0;
      x = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
    }
    if (q < 0.0) x = -x;
  }
  // Halley refinement against the erfc-based CDF.
  const double e = norm_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Density of the standard bivariate normal with correlation rho.
inline double bvn_pdf(double x1, double x2, Rho rho) {
  const double r = rho.value();
  const double one_minus = (1.0 - r) * (1.0 + r);
  const double quad = (x1 * x1 - 2.0 * r * x1 * x2 + x2 * x2) / one_minus;
  return std::exp(-0.5 * quad) / (2.0 * std::numbers::pi * std::sqrt(one_minus));
}

namespace detail {

// Gauss-Legendre abscissae on (-1, 0) and weights for 6, 12 and 20 point
// rules, stored by half (the rules are symmetric).
inline constexpr std::array<double, 3> kGlW6 = {0.1713244923791705, 0.3607615730481384,
                                                0.4679139345726904};
inline constexpr std::array<double, 3> kGlX6 = {-0.9324695142031522, -0.6612093864662647,
                                                -0.2386191860831970};
inline constexpr std::array<double, 6> kGlW12 = {
    0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
    0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
inline constexpr std::array<double, 6> kGlX12 = {
    -0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
    -0.5873179542866171, -0.3678314989981802, -0.1252334085114692};
inline constexpr std::array<double, 10> kGlW20 = {
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
    0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
    0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
    0.1527533871307259};
inline constexpr std::array<double, 10> kGlX20 = {
    -0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
    -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
    -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
    -0.07652652113349733};

template <std::size_t N>
double bvn_upper_impl(double h, double k, double r, const std::array<double, N>& w,
                      const std::array<double, N>& x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < N; ++i) {
      double sn = std::sin(0.5 * asr * (1.0 - x[i]));
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(0.5 * asr * (1.0 + x[i]));
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * two_pi) + norm_cdf(-h) * norm_cdf(-k);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  const double as = (1.0 - r) * (1.0 + r);
  double a = std::sqrt(as);
  const double bs = (h - k) * (h - k);
  const double c = (4.0 - hk) / 8.0;
  const double d = (12.0 - hk) / 16.0;
  bvn = a * std::exp(-0.5 * (bs / as + hk)) *
        (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
  if (hk > -160.0) {
    const double b = std::sqrt(bs);
    bvn -= std::exp(-0.5 * hk) * std::sqrt(two_pi) * norm_cdf(-b / a) * b *
           (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
  }
  a *= 0.5;
  for (std::size_t i = 0; i < N; ++i) {
    double xs = a * (1.0 - x[i]);
    xs *= xs;
    double rs = std::sqrt(1.0 - xs);
    bvn += a * w[i] *
           (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
            std::exp(-0.5 * (bs / xs + hk)) * (1.0 + c * xs * (1.0 + d * xs)));
    xs = 0.25 * as * (1.0 + x[i]) * (1.0 + x[i]);
    rs = std::sqrt(1.0 - xs);
    bvn += a * w[i] * std::exp(-0.5 * (bs / xs + hk)) *
           (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
            (1.0 + c * xs * (1.0 + d * xs)));
  }
  bvn = -bvn / two_pi;
  if (r > 0.0) return bvn + norm_cdf(-std::max(h, k));
  return -bvn + std::max(0.0, norm_cdf(-h) - norm_cdf(-k));
}

// P(Z1 > h, Z2 > k) for finite h, k (Drezner-Wesolowsky with Genz's
// refinements: Gauss-Legendre over the correlation, transformed near |r| = 1).
inline double bvn_upper(double h, double k, double r) {
  const double ar = std::abs(r);
  if (ar < 0.3) return bvn_upper_impl(h, k, r, kGlW6, kGlX6);
  if (ar < 0.75) return bvn_upper_impl(h, k, r, kGlW12, kGlX12);
  return bvn_upper_impl(h, k, r, kGlW20, kGlX20);
}

// (x - rho * given) / sqrt(1 - rho^2), the standardized argument of
// P(Z_other <= x | Z = given); infinite x passes through.
inline Limit conditional_arg(Limit x, double given, double r) {
  if (!std::isfinite(x)) return x;
  return (x - r * given) / std::sqrt((1.0 - r) * (1.0 + r));
}

inline double conditional_cdf(Limit x, double given, double r) {
  return norm_cdf(conditional_arg(x, given, r));
}

// An interval lying mostly above zero is handled through its mirror image.
inline bool reflect_axis(Limit lo, Limit hi) {
  if (lo == -kInf) return false;
  if (hi == kInf) return true;
  return lo + hi > 0.0;
}

}  // namespace detail

/// Phi(hi) - Phi(lo), taken from the upper tail when lo > 0.
inline double norm_mass(Limit lo, Limit hi) {
  if (lo > 0.0) return norm_cdf(-lo) - norm_cdf(-hi);
  return norm_cdf(hi) - norm_cdf(lo);
}

/// P(Z1 <= a, Z2 <= b) under correlation rho. Exactly symmetric in (a, b).
inline double bvn_cdf(Limit a, Limit b, Rho rho) {
  if (a == -kInf || b == -kInf) return 0.0;
  if (a == kInf) return norm_cdf(b);
  if (b == kInf) return norm_cdf(a);
  if (b < a) std::swap(a, b);
  const double p = detail::bvn_upper(-a, -b, rho.value());
  return std::clamp(p, 0.0, 1.0);
}

/// d Phi2 / d x1 = phi(x1) Phi((x2 - rho x1) / sqrt(1 - rho^2)).
inline double bvn_cdf_dx1(double x1, Limit x2, Rho rho) {
  return norm_pdf(x1) * detail::conditional_cdf(x2, x1, rho.value());
}

inline double bvn_cdf_dx2(Limit x1, double x2, Rho rho) {
  return norm_pdf(x2) * detail::conditional_cdf(x1, x2, rho.value());
}

/// Gaussian mass of the rectangle (lo1, hi1] x (lo2, hi2]. Axes are mirrored
/// so the four corner values stay away from 1 and do not cancel.
inline double rect_prob(Limit lo1, Limit hi1, Limit lo2, Limit hi2, Rho rho) {
  if (!(lo1 < hi1) || !(lo2 < hi2)) {
    throw std::domain_error("rect_prob: inverted or empty integration limits");
  }
  const bool flip1 = detail::reflect_axis(lo1, hi1);
  const bool flip2 = detail::reflect_axis(lo2, hi2);
  if (flip1) std::tie(lo1, hi1) = std::pair(-hi1, -lo1);
  if (flip2) std::tie(lo2, hi2) = std::pair(-hi2, -lo2);
  const Rho r(flip1 != flip2 ? -rho.value() : rho.value());
  const double p = bvn_cdf(hi1, hi2, r) - bvn_cdf(lo1, hi2, r) - bvn_cdf(hi1, lo2, r) +
                   bvn_cdf(lo1, lo2, r);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace ordprobit
