#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "formflood/dist.hpp"
#include "formflood/fit.hpp"
#include "formflood/rng.hpp"

using namespace formflood;

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
    return out;
}

std::vector<double> model_values(double a, double b, double c, const std::vector<double>& t) {
    std::vector<double> y(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) y[i] = eval_growth(a, b, c, t[i]);
    return y;
}

} // namespace

TEST_CASE("growth model evaluates to hand-computed values") {
    // (5*1 + 2) * tanh(1)
    CHECK(eval_growth(5.0, 2.0, 1.0, 1.0) == doctest::Approx(5.331159091690354).epsilon(1e-12));
    // (0.1*20 + 3) * tanh(0.05*20) = 5 * tanh(1)
    CHECK(eval_growth(0.1, 3.0, 0.05, 20.0) ==
          doctest::Approx(3.8079707797788244).epsilon(1e-12));
    CHECK(eval_growth(2.0, 7.0, 0.3, 0.0) == 0.0);
    // Far past the ramp the curve hugs its asymptote a*t + b.
    CHECK(eval_growth(2.0, 1.0, 10.0, 100.0) == doctest::Approx(201.0).epsilon(1e-12));
    // Huge c*t must not overflow through cosh.
    CHECK(std::isfinite(eval_growth(1.0, 1.0, 1e3, 1e6)));
    auto row = growth_jacobian_row(1.0, 1.0, 1e3, 1e6);
    CHECK(std::isfinite(row[2]));
}

TEST_CASE("analytic jacobian agrees with central differences") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        double a = uniform_range(rng, 0.05, 5.0);
        double b = uniform_range(rng, 0.5, 20.0);
        double c = uniform_range(rng, 0.02, 0.5);
        double t = uniform_range(rng, 0.1, 240.0);
        auto row = growth_jacobian_row(a, b, c, t);
        double pars[3] = {a, b, c};
        for (int p = 0; p < 3; ++p) {
            double h = 1e-6 * std::max(1.0, std::fabs(pars[p]));
            double save = pars[p];
            pars[p] = save + h;
            double up = eval_growth(pars[0], pars[1], pars[2], t);
            pars[p] = save - h;
            double dn = eval_growth(pars[0], pars[1], pars[2], t);
            pars[p] = save;
            double fd = (up - dn) / (2.0 * h);
            double denom = std::max(1.0, std::fabs(fd));
            CHECK(std::fabs(row[p] - fd) / denom < 1e-6);
        }
    }
}

TEST_CASE("fit recovers exact parameters from noiseless data") {
    auto t = linspace(0.0, 240.0, 200);
    const double a = 0.5, b = 2.0, c = 0.1;
    auto y = model_values(a, b, c, t);
    GrowthFit fit = fit_growth(t, y);
    REQUIRE(fit.converged);
    CHECK(std::fabs(fit.a - a) / a < 1e-3);
    CHECK(std::fabs(fit.b - b) / b < 1e-3);
    CHECK(std::fabs(fit.c - c) / c < 1e-3);
    CHECK(fit.residual < 1e-6);
}

TEST_CASE("fit from an explicit start matches the self-seeded fit") {
    auto t = linspace(0.0, 120.0, 150);
    auto y = model_values(2.0, 1.0, 0.2, t);
    GrowthFit fit = fit_growth_from(t, y, 1.0, 0.5, 0.05);
    REQUIRE(fit.converged);
    CHECK(fit.a == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(fit.b == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(fit.c == doctest::Approx(0.2).epsilon(1e-4));
}

TEST_CASE("fit stays accurate under multiplicative noise") {
    // Sample times geometrically so both the burst and the long-run line are
    // resolved, the way the simulator's own series cluster around the burst.
    std::vector<double> t(200);
    for (int i = 0; i < 200; ++i) t[i] = 0.05 * std::pow(240.0 / 0.05, i / 199.0);

    std::vector<double> err_a, err_b, err_c;
    for (int seed = 0; seed < 20; ++seed) {
        Rng rng(mix_seed(777, seed));
        double a = uniform_range(rng, 0.05, 5.0);
        double b = uniform_range(rng, 5.0, 50.0);
        double c = uniform_range(rng, 0.02, 0.5);
        auto y = model_values(a, b, c, t);
        for (auto& v : y) v *= 1.0 + 0.05 * sample_standard_normal(rng);
        GrowthFit fit = fit_growth(t, y);
        err_a.push_back(std::fabs(fit.a - a) / a);
        err_b.push_back(std::fabs(fit.b - b) / b);
        err_c.push_back(std::fabs(fit.c - c) / c);
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    CHECK(median(err_a) < 0.10);
    CHECK(median(err_b) < 0.10);
    CHECK(median(err_c) < 0.10);
}

TEST_CASE("identically-zero data yields a flat non-converged fit") {
    auto t = linspace(0.0, 100.0, 50);
    std::vector<double> y(t.size(), 0.0);
    GrowthFit fit = fit_growth(t, y);
    CHECK(!fit.converged);
    CHECK(fit.a == 0.0);
    CHECK(fit.b == 0.0);
}

TEST_CASE("linear fits are exact on linear data") {
    std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> y = {5, 7, 9, 11, 13}; // 2x + 3
    LineFit f = linear_fit(x, y);
    CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(3.0).epsilon(1e-12));

    std::vector<double> y0 = {4, 8, 12, 16, 20}; // 4x
    CHECK(linear_fit_through_origin(x, y0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("power-law fit is exact on synthetic power-law data") {
    std::vector<double> x = {64, 128, 256, 512, 1024};
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 * std::pow(v, 3.0));
    ScalingFit f = fit_power_law(x, y);
    REQUIRE(f.valid);
    CHECK(f.kind == ScalingKind::PowerLaw);
    CHECK(f.exponent_or_rate == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(f.coefficient == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(f.r_squared > 1.0 - 1e-12);

    y[2] = -1.0;
    CHECK(!fit_power_law(x, y).valid);
}

TEST_CASE("power-law fit pins a steep decay through 1% noise") {
    Rng rng(2024);
    std::vector<double> x, y;
    for (double v = 128; v <= 8192; v *= 2) {
        x.push_back(v);
        y.push_back(5.0 * std::pow(v, -3.2) * (1.0 + 0.01 * sample_standard_normal(rng)));
    }
    ScalingFit f = fit_power_law(x, y);
    REQUIRE(f.valid);
    CHECK(f.exponent_or_rate > -3.3);
    CHECK(f.exponent_or_rate < -3.1);
}

TEST_CASE("power-law fit is scale equivariant in y") {
    std::vector<double> x = {10, 20, 40, 80, 160};
    std::vector<double> y = {3.1, 8.2, 30.5, 122.0, 480.0};
    ScalingFit base = fit_power_law(x, y);
    std::vector<double> ky;
    for (double v : y) ky.push_back(7.5 * v);
    ScalingFit scaled = fit_power_law(x, ky);
    CHECK(std::fabs(scaled.exponent_or_rate - base.exponent_or_rate) < 1e-9);
    CHECK(scaled.coefficient == doctest::Approx(7.5 * base.coefficient).epsilon(1e-9));
}

TEST_CASE("exponential fit is exact on synthetic exponential data") {
    std::vector<double> x = {0, 100, 200, 300, 400};
    std::vector<double> y;
    for (double v : x) y.push_back(std::exp(0.002 * v));
    ScalingFit f = fit_exponential(x, y);
    REQUIRE(f.valid);
    CHECK(f.kind == ScalingKind::Exponential);
    CHECK(f.exponent_or_rate == doctest::Approx(0.002).epsilon(1e-10));
    CHECK(f.coefficient == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("exponential fit pins a slow growth rate through 1% noise") {
    Rng rng(2025);
    std::vector<double> x, y;
    for (double v = 512; v <= 4096; v += 512) {
        x.push_back(v);
        y.push_back(3.0 * std::exp(0.0019 * v) * (1.0 + 0.01 * sample_standard_normal(rng)));
    }
    ScalingFit f = fit_exponential(x, y);
    REQUIRE(f.valid);
    CHECK(f.exponent_or_rate > 0.0017);
    CHECK(f.exponent_or_rate < 0.0021);
}

TEST_CASE("linear scaling fit reports slope, intercept, and r-squared") {
    std::vector<double> x = {1, 2, 3, 4};
    std::vector<double> y = {3, 5, 7, 9};
    ScalingFit f = fit_linear_scaling(x, y);
    REQUIRE(f.valid);
    CHECK(f.kind == ScalingKind::Linear);
    CHECK(f.exponent_or_rate == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.coefficient == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scaling kind names are stable") {
    CHECK(scaling_kind_name(ScalingKind::PowerLaw) == "power_law");
    CHECK(scaling_kind_name(ScalingKind::Exponential) == "exponential");
    CHECK(scaling_kind_name(ScalingKind::Linear) == "linear");
}

TEST_CASE("refitting from a returned optimum is a no-op") {
    auto t = linspace(0.0, 120.0, 100);
    auto y = model_values(1.5, 8.0, 0.15, t);
    Rng rng(31);
    for (auto& v : y) v *= 1.0 + 0.05 * sample_standard_normal(rng);
    GrowthFit first = fit_growth(t, y);
    REQUIRE(first.converged);
    GrowthFit again = fit_growth_from(t, y, first.a, first.b, first.c);
    CHECK(again.converged);
    CHECK(again.iterations <= 2);
    CHECK(again.residual <= first.residual * (1.0 + 1e-12));
}

TEST_CASE("growth model stays nonnegative for nonnegative parameters") {
    Rng rng(77);
    for (int i = 0; i < 1000; ++i) {
        double a = uniform_range(rng, 0.0, 10.0);
        double b = uniform_range(rng, 0.0, 50.0);
        double c = uniform_range(rng, 0.0, 2.0);
        double t = uniform_range(rng, 0.0, 500.0);
        CHECK(eval_growth(a, b, c, t) >= 0.0);
    }
}

TEST_CASE("long-term rate projects the converged slope and rejects junk fits") {
    GrowthFit good;
    good.a = 0.5;
    good.b = 2.0;
    good.c = 0.1;
    good.converged = true;
    CHECK(fitted_long_term_rate(good) == 0.5);
    good.converged = false;
    CHECK_THROWS_AS(fitted_long_term_rate(good), std::invalid_argument);
}

TEST_CASE("forms_to_kill inverts a clean inverse-proportional table exactly") {
    std::vector<SweepPoint> table = {
        {100, 10.0}, {200, 5.0}, {400, 2.5}, {800, 1.25}};
    auto est = forms_to_kill(table, 4.0);
    CHECK(!est.extrapolated);
    CHECK(est.forms == doctest::Approx(250.0).epsilon(1e-9));

    // Doubling the mailbox doubles every fill time: need twice the forms.
    auto est2 = forms_to_kill(table, 4.0, 2.0);
    CHECK(est2.forms == doctest::Approx(500.0).epsilon(1e-9));
}

TEST_CASE("forms_to_kill handles deadlines outside the table and says so") {
    std::vector<SweepPoint> table = {
        {100, 10.0}, {200, 5.0}, {400, 2.5}, {800, 1.25}};
    // A loose deadline is already met by the smallest tabulated attack.
    auto lo = forms_to_kill(table, 20.0);
    CHECK(lo.extrapolated);
    CHECK(lo.forms == doctest::Approx(100.0).epsilon(1e-9));
    auto loosest = forms_to_kill(table, std::numeric_limits<double>::infinity());
    CHECK(loosest.forms == doctest::Approx(100.0).epsilon(1e-9));
    // A tighter-than-measured deadline continues the final segment's slope.
    auto hi = forms_to_kill(table, 1.0);
    CHECK(hi.extrapolated);
    CHECK(hi.forms == doctest::Approx(1000.0).epsilon(1e-9));

    auto single = forms_to_kill({{100, 10.0}}, 5.0);
    CHECK(single.extrapolated);
    CHECK(single.forms == doctest::Approx(200.0).epsilon(1e-9));
}

TEST_CASE("forms_to_kill rejects unusable input") {
    CHECK(forms_to_kill({}, 10.0).forms == 0.0);
    CHECK(forms_to_kill({{100, 10}}, -1.0).forms == 0.0);
    CHECK(forms_to_kill({{-5, 10}, {0, 3}}, 10.0).forms == 0.0);
}
