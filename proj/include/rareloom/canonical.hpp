#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rareloom/errors.hpp"
#include "rareloom/measures.hpp"

namespace rareloom {

enum class TaperBase { Log, NegLog, Reciprocal, Power };

/// A base integrand clamped to constants outside [1/D, D], making it
/// bounded and globally Lipschitz. D = +inf leaves the base unclamped,
/// which is only legal where the integration site accepts unbounded f.
struct TaperedFunction {
  TaperBase base = TaperBase::Log;
  double power_q = 0.0;  // exponent, Power base only; must be nonzero
  double taper_D = std::numeric_limits<double>::infinity();

  static TaperedFunction log(double D) { return {TaperBase::Log, 0.0, D}; }
  static TaperedFunction neg_log(double D) { return {TaperBase::NegLog, 0.0, D}; }
  static TaperedFunction reciprocal(double D) { return {TaperBase::Reciprocal, 0.0, D}; }
  static TaperedFunction power(double q, double D) { return {TaperBase::Power, q, D}; }

  void validate() const {
    if (!(taper_D >= 1.0)) {
      throw std::invalid_argument("TaperedFunction: taper bound D must be >= 1");
    }
    if (base == TaperBase::Power && power_q == 0.0) {
      throw std::invalid_argument("TaperedFunction: power exponent must be nonzero");
    }
  }

  bool has_finite_taper() const { return std::isfinite(taper_D); }

  double raw(double x) const {
    switch (base) {
      case TaperBase::Log:
        return std::log(x);
      case TaperBase::NegLog:
        return -std::log(x);
      case TaperBase::Reciprocal:
        return 1.0 / x;
      case TaperBase::Power:
        return std::pow(x, power_q);
    }
    return 0.0;
  }
};

/// Three-branch evaluation: constant below 1/D, the base on [1/D, D],
/// constant above D.
inline double taper_eval(const TaperedFunction& f, double x) {
  f.validate();
  if (!(x > 0.0)) {
    throw std::invalid_argument("taper_eval: x must be positive");
  }
  if (!f.has_finite_taper()) return f.raw(x);
  const double lo = 1.0 / f.taper_D;
  if (x < lo) return f.raw(lo);
  if (x > f.taper_D) return f.raw(f.taper_D);
  return f.raw(x);
}

/// Exact Lipschitz constant of the tapered function on the positive reals:
/// log classes give D, the reciprocal gives D^2, and x^q gives |q|*D^|q-1|.
inline double lipschitz_constant(const TaperedFunction& f) {
  f.validate();
  if (!f.has_finite_taper()) {
    throw UnboundedFunctionError(
        "lipschitz_constant: base is unbounded without a finite taper");
  }
  const double d = f.taper_D;
  switch (f.base) {
    case TaperBase::Log:
    case TaperBase::NegLog:
      return d;
    case TaperBase::Reciprocal:
      return d * d;
    case TaperBase::Power:
      return std::abs(f.power_q) * std::pow(d, std::abs(f.power_q - 1.0));
  }
  return 0.0;
}

/// Plug-in integral of the tapered function against a finitely supported
/// measure.
inline double integrate(const DiscreteMeasure& p, const TaperedFunction& f) {
  f.validate();
  if (!f.has_finite_taper()) {
    throw UnboundedFunctionError("integrate: base is unbounded without a finite taper");
  }
  double total = 0.0;
  for (const Atom& a : p.atoms()) {
    total += a.weight * taper_eval(f, a.location);
  }
  return total;
}

enum class ScheduleKind { FixedD, Power, Fallback, KnownBounds };

/// Rule mapping the sample size n to the taper bound D_n (and, for the
/// support estimator, to the power exponent q_n).
struct Schedule {
  ScheduleKind kind = ScheduleKind::Power;
  double fixed_D = 0.0;
  double s = 1.0;        // rate exponent for Power (and KnownBounds speed-up)
  double epsilon = 0.5;  // Fallback growth exponent, in (0,1)
  double d_min = 0.0;    // KnownBounds interval
  double d_max = 0.0;

  static Schedule fixed(double D) {
    Schedule sch;
    sch.kind = ScheduleKind::FixedD;
    sch.fixed_D = D;
    return sch;
  }
  static Schedule power(double s) {
    Schedule sch;
    sch.kind = ScheduleKind::Power;
    sch.s = s;
    return sch;
  }
  static Schedule fallback(double epsilon) {
    Schedule sch;
    sch.kind = ScheduleKind::Fallback;
    sch.epsilon = epsilon;
    return sch;
  }
  static Schedule known_bounds(double d_min, double d_max, double s = 1.0) {
    Schedule sch;
    sch.kind = ScheduleKind::KnownBounds;
    sch.d_min = d_min;
    sch.d_max = d_max;
    sch.s = s;
    return sch;
  }

  void validate() const {
    switch (kind) {
      case ScheduleKind::FixedD:
        if (!(fixed_D >= 1.0)) {
          throw InvalidConfigurationError("Schedule: fixed D must be >= 1");
        }
        break;
      case ScheduleKind::Power:
        if (!(s > 0.0)) {
          throw InvalidConfigurationError("Schedule: power exponent s must be positive");
        }
        break;
      case ScheduleKind::Fallback:
        if (!(epsilon > 0.0 && epsilon < 1.0)) {
          throw InvalidConfigurationError("Schedule: fallback epsilon must be in (0,1)");
        }
        break;
      case ScheduleKind::KnownBounds:
        if (!(d_min > 0.0 && d_min <= d_max)) {
          throw InvalidConfigurationError("Schedule: need 0 < d_min <= d_max");
        }
        if (!(s > 0.0)) {
          throw InvalidConfigurationError("Schedule: s must be positive");
        }
        break;
    }
  }
};

/// Taper bound D_n for a plug-in estimator whose Lipschitz constant scales
/// as D^degree: a power schedule spends the full rate budget, D_n = n^(s/degree),
/// so Lip(f_{D_n}) stays O(n^s).
inline double schedule_D(const Schedule& sch, long n, double lipschitz_degree = 1.0) {
  sch.validate();
  if (n < 1) {
    throw InvalidConfigurationError("schedule_D: n must be >= 1");
  }
  if (!(lipschitz_degree > 0.0)) {
    throw InvalidConfigurationError("schedule_D: lipschitz degree must be positive");
  }
  switch (sch.kind) {
    case ScheduleKind::FixedD:
      return sch.fixed_D;
    case ScheduleKind::Power:
      return std::max(1.0, std::pow(static_cast<double>(n), sch.s / lipschitz_degree));
    case ScheduleKind::Fallback:
      return std::exp(std::pow(std::log(static_cast<double>(n)), sch.epsilon));
    case ScheduleKind::KnownBounds:
      return std::max(1.0, std::max(1.0 / sch.d_min, sch.d_max));
  }
  return 1.0;
}

/// Estimates H(p_n) - log n as -integral of the D_n-tapered log.
inline double estimate_entropy(const DiscreteMeasure& p_tilde, const Schedule& sch,
                               long n) {
  const double d = schedule_D(sch, n, 1.0);
  return -integrate(p_tilde, TaperedFunction::log(d));
}

/// Normalized sequence log-probability: exactly the negated entropy estimate.
inline double estimate_seq_logprob(const DiscreteMeasure& p_tilde, const Schedule& sch,
                                   long n) {
  return -estimate_entropy(p_tilde, sch, n);
}

/// Estimates |A_n|/n as the integral of the tapered reciprocal; the
/// reciprocal's Lipschitz constant grows like D^2, so a power schedule
/// halves the exponent.
inline double estimate_alphabet_size(const DiscreteMeasure& p_tilde, const Schedule& sch,
                                     long n) {
  const double d = schedule_D(sch, n, 2.0);
  return integrate(p_tilde, TaperedFunction::reciprocal(d));
}

struct SupportEstimate {
  double c_lo = 0.0;  // power-mean estimate of the lower support endpoint
  double c_hi = 0.0;  // power-mean estimate of the upper support endpoint
  double q = 0.0;     // exponent q_n actually used
  double taper_D = 0.0;
  // The (integral of x^-q)^(1/q) form as displayed, which converges to the
  // reciprocal of the lower endpoint; c_lo above is its reciprocal.
  double raw_neg_power_mean = 0.0;
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// Tapered power means at an explicit exponent and taper bound. Power sums
/// are accumulated in log space, so exponents in the tens cannot overflow.
/// A single atom short-circuits to its clamped location on both ends.
inline SupportEstimate support_power_estimate(const DiscreteMeasure& p_tilde, double q,
                                              double taper_D) {
  if (!(q > 0.0)) {
    throw InvalidConfigurationError("support_power_estimate: q must be positive");
  }
  if (!(taper_D >= 1.0)) {
    throw InvalidConfigurationError("support_power_estimate: taper bound must be >= 1");
  }
  SupportEstimate est;
  est.q = q;
  est.taper_D = taper_D;

  auto clamp = [taper_D](double x) {
    return std::min(std::max(x, 1.0 / taper_D), taper_D);
  };

  if (p_tilde.size() == 1) {
    const double c = clamp(p_tilde.atoms().front().location);
    est.c_lo = c;
    est.c_hi = c;
    est.raw_neg_power_mean = 1.0 / c;
    return est;
  }

  std::vector<double> lo_terms, hi_terms;
  lo_terms.reserve(p_tilde.size());
  hi_terms.reserve(p_tilde.size());
  for (const Atom& a : p_tilde.atoms()) {
    const double lx = std::log(clamp(a.location));
    const double lw = std::log(a.weight);
    lo_terms.push_back(lw - q * lx);
    hi_terms.push_back(lw + q * lx);
  }
  const double log_neg_sum = detail::log_sum_exp(lo_terms);
  const double log_pos_sum = detail::log_sum_exp(hi_terms);
  est.raw_neg_power_mean = std::exp(log_neg_sum / q);
  est.c_lo = std::exp(-log_neg_sum / q);
  est.c_hi = std::exp(log_pos_sum / q);
  return est;
}

/// Support-interval estimate via tapered power means with a schedule-driven
/// exponent: q_n = ln n / ln ln n with D_n = n^(s/(2 q_n)) on the power
/// path; known bounds fix the taper and speed q_n up; the fallback path
/// grows D_n = n^(1/(q_n sqrt(ln ln n))) when the rate exponent is unknown.
inline SupportEstimate estimate_support(const DiscreteMeasure& p_tilde,
                                        const Schedule& sch, long n) {
  sch.validate();
  if (n < 16) {
    throw InvalidConfigurationError(
        "estimate_support: n must be >= 16 for a stable exponent schedule");
  }
  const double ln_n = std::log(static_cast<double>(n));
  const double ln_ln_n = std::log(ln_n);

  double q = 0.0, d = 0.0;
  switch (sch.kind) {
    case ScheduleKind::Power:
      q = ln_n / ln_ln_n;
      d = std::pow(static_cast<double>(n), sch.s / (2.0 * q));
      break;
    case ScheduleKind::Fallback:
      q = ln_n / ln_ln_n;
      d = std::pow(static_cast<double>(n), 1.0 / (q * std::sqrt(ln_ln_n)));
      break;
    case ScheduleKind::KnownBounds:
      if (!(sch.d_min < sch.d_max)) {
        throw InvalidConfigurationError(
            "estimate_support: known bounds must be a nondegenerate interval");
      }
      q = 0.5 * sch.s * ln_n / std::log(sch.d_max / sch.d_min);
      d = std::max(1.0 / sch.d_min, sch.d_max);
      break;
    case ScheduleKind::FixedD:
      throw InvalidConfigurationError(
          "estimate_support: a fixed taper cannot drive the exponent schedule");
  }
  return support_power_estimate(p_tilde, q, std::max(d, 1.0));
}

}  // namespace rareloom
