#include "formflood/dist.hpp"

#include <algorithm>
#include <cmath>

namespace formflood {

double sample_standard_normal(Rng& rng) {
    // Box-Muller; u1 is kept away from zero so log() stays finite.
    double u1 = 0.0;
    do {
        u1 = uniform01(rng);
    } while (u1 <= 0.0);
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Dist::sample(Rng& rng) const {
    double v = 0.0;
    switch (kind) {
    case DistKind::Constant:
        v = p1;
        break;
    case DistKind::Uniform:
        v = uniform_range(rng, p1, p2);
        break;
    case DistKind::Exponential: {
        double u = 0.0;
        do {
            u = uniform01(rng);
        } while (u <= 0.0);
        v = -p1 * std::log(u);
        break;
    }
    case DistKind::Lognormal:
        v = p1 * std::exp(p2 * sample_standard_normal(rng));
        break;
    }
    if (clamp_min && v < *clamp_min) v = *clamp_min;
    if (clamp_max && v > *clamp_max) v = *clamp_max;
    return v;
}

double Dist::mean() const {
    switch (kind) {
    case DistKind::Constant: return p1;
    case DistKind::Uniform: return 0.5 * (p1 + p2);
    case DistKind::Exponential: return p1;
    case DistKind::Lognormal: return p1 * std::exp(0.5 * p2 * p2);
    }
    return 0.0;
}

Dist Dist::constant(double v) { return Dist{DistKind::Constant, v, 0.0, {}, {}}; }
Dist Dist::uniform(double lo, double hi) { return Dist{DistKind::Uniform, lo, hi, {}, {}}; }
Dist Dist::exponential(double mean) { return Dist{DistKind::Exponential, mean, 0.0, {}, {}}; }
Dist Dist::lognormal(double median, double sigma) {
    return Dist{DistKind::Lognormal, median, sigma, {}, {}};
}

Dist Dist::clamped(double lo, double hi) const {
    Dist d = *this;
    d.clamp_min = lo;
    d.clamp_max = hi;
    return d;
}

std::string dist_kind_name(DistKind k) {
    switch (k) {
    case DistKind::Constant: return "constant";
    case DistKind::Uniform: return "uniform";
    case DistKind::Exponential: return "exponential";
    case DistKind::Lognormal: return "lognormal";
    }
    return "constant";
}

std::optional<DistKind> dist_kind_from_name(const std::string& name) {
    if (name == "constant") return DistKind::Constant;
    if (name == "uniform") return DistKind::Uniform;
    if (name == "exponential") return DistKind::Exponential;
    if (name == "lognormal") return DistKind::Lognormal;
    return std::nullopt;
}

} // namespace formflood
