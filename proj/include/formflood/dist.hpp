#pragma once

#include <optional>
#include <string>
#include <vector>

#include "formflood/rng.hpp"

namespace formflood {

enum class DistKind { Constant, Uniform, Exponential, Lognormal };

// A sampleable scalar distribution with optional clamping. Sampling is
// hand-rolled (inversion / Box-Muller) so that a given (kind, params, seed)
// yields identical values on every platform.
struct Dist {
    DistKind kind = DistKind::Constant;
    // Constant: p1 = value.
    // Uniform: p1 = lo, p2 = hi.
    // Exponential: p1 = mean.
    // Lognormal: p1 = median (scale), p2 = sigma of underlying normal.
    double p1 = 0.0;
    double p2 = 0.0;
    std::optional<double> clamp_min;
    std::optional<double> clamp_max;

    double sample(Rng& rng) const;
    double mean() const; // analytic mean, ignoring clamps

    static Dist constant(double v);
    static Dist uniform(double lo, double hi);
    static Dist exponential(double mean);
    static Dist lognormal(double median, double sigma);

    Dist clamped(double lo, double hi) const;
};

// Standard normal via Box-Muller (one value per call; the pair's second half
// is discarded to keep sampling stateless).
double sample_standard_normal(Rng& rng);

std::string dist_kind_name(DistKind k);
std::optional<DistKind> dist_kind_from_name(const std::string& name);

} // namespace formflood
