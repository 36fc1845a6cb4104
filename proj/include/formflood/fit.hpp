#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

namespace formflood {

// Saturating-ramp growth model for cumulative message volume:
//   M(t) = (a*t + b) * tanh(c*t)
// Near t=0 it rises like (b + a t) c t; for large t it approaches the line
// a*t + b, so `a` is the long-run rate and `c` sets how fast the ramp opens.
double eval_growth(double a, double b, double c, double t);

// Analytic partial derivatives at one point, order {dM/da, dM/db, dM/dc}.
std::array<double, 3> growth_jacobian_row(double a, double b, double c, double t);

struct GrowthFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0; // sum of squared errors at the final parameters
};

// Levenberg-Marquardt on the growth model with analytic Jacobian. Multi-start
// over ramp speeds; candidates whose ramp never resolves inside the window
// (c * t_max < 1, the degenerate quadratic limit) lose to ones that do.
GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& y);

// Same, but from explicit starting parameters (single start).
GrowthFit fit_growth_from(const std::vector<double>& t, const std::vector<double>& y,
                          double a0, double b0, double c0);

// The model's long-run arrival rate; requires a converged fit.
// Throws std::invalid_argument on an unconverged one.
double fitted_long_term_rate(const GrowthFit& fit);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// Ordinary least squares y = slope*x + intercept.
LineFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Least squares y = slope*x (no intercept).
double linear_fit_through_origin(const std::vector<double>& x, const std::vector<double>& y);

enum class ScalingKind { PowerLaw, Exponential, Linear };

std::string_view scaling_kind_name(ScalingKind k);

// One fitted scaling relationship between sweep quantities:
//   power law:    y = coefficient * x^exponent_or_rate   (OLS on ln x, ln y)
//   exponential:  y = coefficient * e^(exponent_or_rate * x)  (OLS on x, ln y)
//   linear:       y = coefficient + exponent_or_rate * x      (plain OLS)
// r_squared is reported in the fit's own (possibly log) coordinates.
struct ScalingFit {
    ScalingKind kind = ScalingKind::Linear;
    double coefficient = 0.0;
    double exponent_or_rate = 0.0;
    double r_squared = 0.0;
    bool valid = false; // false on empty/degenerate input or nonpositive data
};

ScalingFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);
ScalingFit fit_exponential(const std::vector<double>& x, const std::vector<double>& y);
ScalingFit fit_linear_scaling(const std::vector<double>& x, const std::vector<double>& y);

struct SweepPoint {
    double forms = 0.0;         // attack size used for the run
    double kill_minutes = 0.0;  // mean time for the inbox to fill
};

struct FormsEstimate {
    double forms = 0.0;
    bool extrapolated = false; // true when the deadline fell outside the table
};

// How many forms are needed to fill the mailbox within `deadline_minutes`,
// read off a measured (forms -> kill time) table by piecewise interpolation on
// log-log axes. `quota_ratio` rescales the table to a different mailbox size:
// fill time is proportional to quota, so kill' = kill * quota_ratio.
// A deadline looser than the smallest measured attack already satisfies it,
// so the smallest tabulated F is returned (flagged); deadlines tighter than
// the largest measured attack extrapolate along the final segment (flagged).
FormsEstimate forms_to_kill(std::vector<SweepPoint> table, double deadline_minutes,
                            double quota_ratio = 1.0);

} // namespace formflood
