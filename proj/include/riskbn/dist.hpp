// Copyright 2026 The riskbn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Univariate distribution primitives used by CPD expressions.
//
// Conventions (also documented in the model format reference):
//   Normal(mean, variance)     -- second parameter is the variance
//   Exponential(rate)
//   Gamma(shape, scale)        -- mean = shape * scale
//   Poisson(mean)
//   Geometric(p)               -- failures before first success, support 0,1,2,...
//   Uniform(lo, hi)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "riskbn/common.hpp"

namespace riskbn {

enum class DistName { Normal, Exponential, Gamma, Poisson, Geometric, Uniform };

inline const char* dist_name(DistName d) {
  switch (d) {
    case DistName::Normal: return "Normal";
    case DistName::Exponential: return "Exponential";
    case DistName::Gamma: return "Gamma";
    case DistName::Poisson: return "Poisson";
    case DistName::Geometric: return "Geometric";
    case DistName::Uniform: return "Uniform";
  }
  return "?";
}

inline int dist_arity(DistName d) {
  switch (d) {
    case DistName::Normal:
    case DistName::Gamma:
    case DistName::Uniform: return 2;
    default: return 1;
  }
}

inline bool dist_is_discrete(DistName d) {
  return d == DistName::Poisson || d == DistName::Geometric;
}

// A fully parameterized univariate distribution.
struct Dist {
  DistName name;
  double p0 = 0.0;
  double p1 = 0.0;

  void validate() const {
    switch (name) {
      case DistName::Normal:
        if (!(p1 > 0.0)) throw numeric_error("Normal variance must be > 0");
        break;
      case DistName::Exponential:
        if (!(p0 > 0.0)) throw numeric_error("Exponential rate must be > 0");
        break;
      case DistName::Gamma:
        if (!(p0 > 0.0) || !(p1 > 0.0)) throw numeric_error("Gamma shape/scale must be > 0");
        break;
      case DistName::Poisson:
        if (!(p0 > 0.0)) throw numeric_error("Poisson mean must be > 0");
        break;
      case DistName::Geometric:
        if (!(p0 > 0.0) || !(p0 <= 1.0)) throw numeric_error("Geometric p must be in (0,1]");
        break;
      case DistName::Uniform:
        if (!(p1 > p0)) throw numeric_error("Uniform needs lo < hi");
        break;
    }
  }

  bool discrete() const { return dist_is_discrete(name); }

  double mean() const {
    switch (name) {
      case DistName::Normal: return p0;
      case DistName::Exponential: return 1.0 / p0;
      case DistName::Gamma: return p0 * p1;
      case DistName::Poisson: return p0;
      case DistName::Geometric: return (1.0 - p0) / p0;
      case DistName::Uniform: return 0.5 * (p0 + p1);
    }
    return 0.0;
  }

  double variance() const {
    switch (name) {
      case DistName::Normal: return p1;
      case DistName::Exponential: return 1.0 / (p0 * p0);
      case DistName::Gamma: return p0 * p1 * p1;
      case DistName::Poisson: return p0;
      case DistName::Geometric: return (1.0 - p0) / (p0 * p0);
      case DistName::Uniform: return (p1 - p0) * (p1 - p0) / 12.0;
    }
    return 0.0;
  }

  // Density for continuous names, PMF at round(x) for discrete ones.
  double pdf(double x) const {
    switch (name) {
      case DistName::Normal: {
        const double d = x - p0;
        return std::exp(-0.5 * d * d / p1) / std::sqrt(2.0 * M_PI * p1);
      }
      case DistName::Exponential:
        return x < 0.0 ? 0.0 : p0 * std::exp(-p0 * x);
      case DistName::Gamma: {
        if (x <= 0.0) return 0.0;
        const double lg = (p0 - 1.0) * std::log(x) - x / p1 - std::lgamma(p0) - p0 * std::log(p1);
        return std::exp(lg);
      }
      case DistName::Poisson: {
        const double k = std::round(x);
        if (k < 0.0) return 0.0;
        return std::exp(k * std::log(p0) - p0 - std::lgamma(k + 1.0));
      }
      case DistName::Geometric: {
        const double k = std::round(x);
        if (k < 0.0) return 0.0;
        return p0 * std::pow(1.0 - p0, k);
      }
      case DistName::Uniform:
        return (x < p0 || x > p1) ? 0.0 : 1.0 / (p1 - p0);
    }
    return 0.0;
  }

  double cdf(double x) const {
    switch (name) {
      case DistName::Normal:
        return 0.5 * std::erfc(-(x - p0) / std::sqrt(2.0 * p1));
      case DistName::Exponential:
        return x <= 0.0 ? 0.0 : 1.0 - std::exp(-p0 * x);
      case DistName::Gamma:
        return x <= 0.0 ? 0.0 : boost::math::gamma_p(p0, x / p1);
      case DistName::Poisson: {
        if (x < 0.0) return 0.0;
        const double k = std::floor(x + 1e-12);
        return boost::math::gamma_q(k + 1.0, p0);
      }
      case DistName::Geometric: {
        if (x < 0.0) return 0.0;
        const double k = std::floor(x + 1e-12);
        return 1.0 - std::pow(1.0 - p0, k + 1.0);
      }
      case DistName::Uniform:
        if (x <= p0) return 0.0;
        if (x >= p1) return 1.0;
        return (x - p0) / (p1 - p0);
    }
    return 0.0;
  }

  double quantile(double q) const {
    q = std::clamp(q, 0.0, 1.0);
    switch (name) {
      case DistName::Normal:
        return p0 + std::sqrt(2.0 * p1) * boost::math::erf_inv(2.0 * q - 1.0);
      case DistName::Exponential:
        return q >= 1.0 ? HUGE_VAL : -std::log1p(-q) / p0;
      case DistName::Gamma:
        return p1 * boost::math::gamma_p_inv(p0, q);
      case DistName::Poisson: {
        // Discrete search from a normal guess.
        double k = std::max(0.0, std::floor(p0 + std::sqrt(p0) * (2.0 * q - 1.0) * 3.0));
        while (k > 0.0 && cdf(k - 1.0) >= q) k -= 1.0;
        while (cdf(k) < q) k += 1.0;
        return k;
      }
      case DistName::Geometric: {
        if (q >= 1.0) return HUGE_VAL;
        return std::max(0.0, std::ceil(std::log1p(-q) / std::log1p(-p0) - 1.0));
      }
      case DistName::Uniform:
        return p0 + q * (p1 - p0);
    }
    return 0.0;
  }

  // Deterministic, engine-independent sampling (used by the Monte Carlo
  // oracle, which must be bit-stable for a given seed).
  double sample(std::mt19937_64& rng) const {
    auto u01 = [&rng]() {
      // 53-bit uniform in (0,1).
      return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    };
    switch (name) {
      case DistName::Normal: {
        const double u1 = u01(), u2 = u01();
        return p0 + std::sqrt(p1) * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      }
      case DistName::Exponential:
        return -std::log(u01()) / p0;
      case DistName::Gamma: {
        // Marsaglia-Tsang; the shape<1 boost uses one extra uniform.
        double shape = p0;
        double boost_factor = 1.0;
        if (shape < 1.0) {
          boost_factor = std::pow(u01(), 1.0 / shape);
          shape += 1.0;
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
          double x, v;
          do {
            const double u1 = u01(), u2 = u01();
            x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
            v = 1.0 + c * x;
          } while (v <= 0.0);
          v = v * v * v;
          const double u = u01();
          if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * p1 * boost_factor;
          if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * p1 * boost_factor;
        }
      }
      case DistName::Poisson: {
        if (p0 < 60.0) {
          const double limit = std::exp(-p0);
          double prod = u01();
          double k = 0.0;
          while (prod > limit) {
            prod *= u01();
            k += 1.0;
          }
          return k;
        }
        // Split recursively for large means.
        Dist half{DistName::Poisson, p0 * 0.5, 0.0};
        return half.sample(rng) + half.sample(rng);
      }
      case DistName::Geometric:
        return std::floor(std::log(u01()) / std::log1p(-p0));
      case DistName::Uniform:
        return p0 + (p1 - p0) * u01();
    }
    return 0.0;
  }

  // Truncated support [quantile(eps), quantile(1-eps)], with natural hard
  // bounds respected.
  std::pair<double, double> support(double eps) const {
    switch (name) {
      case DistName::Normal:
        return {quantile(eps), quantile(1.0 - eps)};
      case DistName::Exponential:
      case DistName::Gamma:
      case DistName::Poisson:
      case DistName::Geometric:
        return {0.0, quantile(1.0 - eps)};
      case DistName::Uniform:
        return {p0, p1};
    }
    return {0.0, 1.0};
  }

  // Whether each support end is a natural bound (no mass beyond it) rather
  // than a quantile truncation.
  std::pair<bool, bool> support_hardness() const {
    switch (name) {
      case DistName::Normal: return {false, false};
      case DistName::Uniform: return {true, true};
      default: return {true, false};  // nonnegative families
    }
  }
};

// An interval with per-end hardness, used to propagate supports through
// expressions.
struct SupportBound {
  double lo = 0.0, hi = 0.0;
  bool lo_hard = false, hi_hard = false;
};

}  // namespace riskbn
