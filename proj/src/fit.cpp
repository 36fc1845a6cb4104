#include "formflood/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace formflood {

double eval_growth(double a, double b, double c, double t) {
    return (a * t + b) * std::tanh(c * t);
}

std::array<double, 3> growth_jacobian_row(double a, double b, double c, double t) {
    double th = std::tanh(c * t);
    double sech2 = 1.0 - th * th; // sech^2 stays finite where cosh overflows
    return {t * th, th, (a * t + b) * t * sech2};
}

namespace {

constexpr double kCMin = 1e-6;
constexpr double kCMax = 1e3;

double sum_sq_error(const std::vector<double>& t, const std::vector<double>& y,
                    double a, double b, double c) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double r = y[i] - eval_growth(a, b, c, t[i]);
        s += r * r;
    }
    return s;
}

// Gaussian elimination with partial pivoting on a 3x3 system.
bool solve3(double m[3][3], double rhs[3], double out[3]) {
    int idx[3] = {0, 1, 2};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(m[idx[r]][col]) > std::fabs(m[idx[piv]][col])) piv = r;
        std::swap(idx[col], idx[piv]);
        double d = m[idx[col]][col];
        if (std::fabs(d) < 1e-300) return false;
        for (int r = col + 1; r < 3; ++r) {
            double f = m[idx[r]][col] / d;
            for (int k = col; k < 3; ++k) m[idx[r]][k] -= f * m[idx[col]][k];
            rhs[idx[r]] -= f * rhs[idx[col]];
        }
    }
    for (int col = 2; col >= 0; --col) {
        double v = rhs[idx[col]];
        for (int k = col + 1; k < 3; ++k) v -= m[idx[col]][k] * out[k];
        out[col] = v / m[idx[col]][col];
    }
    return true;
}

} // namespace

LineFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    std::size_t n = std::min(x.size(), y.size());
    if (n == 0) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double den = n * sxx - sx * sx;
    if (std::fabs(den) < 1e-300) {
        f.intercept = sy / static_cast<double>(n);
        return f;
    }
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / static_cast<double>(n);
    return f;
}

double linear_fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
    double sxx = 0, sxy = 0;
    std::size_t n = std::min(x.size(), y.size());
    for (std::size_t i = 0; i < n; ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    if (sxx < 1e-300) return 0.0;
    return sxy / sxx;
}

GrowthFit fit_growth_from(const std::vector<double>& t, const std::vector<double>& y,
                          double a0, double b0, double c0) {
    GrowthFit fit;
    std::size_t n = std::min(t.size(), y.size());
    if (n < 3) return fit;

    double a = a0, b = b0;
    double c = std::clamp(c0, kCMin, kCMax);
    double sse = sum_sq_error(t, y, a, b, c);
    double lambda = 1e-3;

    for (int iter = 0; iter < 200; ++iter) {
        fit.iterations = iter + 1;
        double jtj[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        double jtr[3] = {0, 0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            auto row = growth_jacobian_row(a, b, c, t[i]);
            double r = y[i] - eval_growth(a, b, c, t[i]);
            for (int p = 0; p < 3; ++p) {
                jtr[p] += row[p] * r;
                for (int q = 0; q < 3; ++q) jtj[p][q] += row[p] * row[q];
            }
        }

        bool stepped = false;
        while (lambda < 1e12) {
            double m[3][3];
            double rhs[3] = {jtr[0], jtr[1], jtr[2]};
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q)
                    m[p][q] = jtj[p][q] + (p == q ? lambda * std::max(jtj[p][p], 1e-12) : 0.0);
            double delta[3];
            if (!solve3(m, rhs, delta)) {
                lambda *= 10.0;
                continue;
            }
            double na = a + delta[0];
            double nb = b + delta[1];
            double nc = std::clamp(c + delta[2], kCMin, kCMax);
            double nsse = sum_sq_error(t, y, na, nb, nc);
            if (nsse <= sse) {
                double drop = sse - nsse;
                a = na;
                b = nb;
                c = nc;
                sse = nsse;
                lambda = std::max(lambda * 0.1, 1e-12);
                stepped = true;
                if (drop <= 1e-10 * std::max(sse, 1e-30)) {
                    fit.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            fit.converged = true; // no direction improves: at a (local) optimum
            break;
        }
        if (fit.converged) break;
    }

    fit.a = a;
    fit.b = b;
    fit.c = c;
    fit.residual = sse;
    return fit;
}

GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& y) {
    std::size_t n = std::min(t.size(), y.size());
    if (n < 3) return GrowthFit{};

    double ymax = 0.0;
    for (std::size_t i = 0; i < n; ++i) ymax = std::max(ymax, std::fabs(y[i]));
    if (ymax == 0.0) {
        GrowthFit flat;
        flat.c = kCMin;
        return flat; // identically-zero data: parameters are unidentifiable
    }

    // Tail line gives the asymptote (a t + b); the half-rise time anchors a
    // ramp-speed guess. The ramp is the least identifiable parameter, so run
    // from several starting speeds and keep the best optimum: a single start
    // can slide into the degenerate c->0 corner where the model looks
    // quadratic and the asymptote information is lost.
    std::size_t tail = std::max<std::size_t>(2, n / 3);
    std::vector<double> tt(t.end() - static_cast<std::ptrdiff_t>(tail), t.end());
    std::vector<double> ty(y.end() - static_cast<std::ptrdiff_t>(tail), y.end());
    LineFit line = linear_fit(tt, ty);
    double a0 = line.slope;
    double b0 = line.intercept;

    double half = 0.5 * ymax;
    double t_half = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::fabs(y[i]) >= half && t[i] > 0.0) {
            t_half = t[i];
            break;
        }
    }
    if (t_half <= 0.0) t_half = 2.0;

    double t_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) t_max = std::max(t_max, t[i]);

    // A candidate whose ramp never opens inside the window (c*t_max < 1) is
    // the degenerate limit where the model collapses to a quadratic; it can
    // edge out the true shape on noisy data, so it only wins when no start
    // found a resolvable ramp.
    auto resolvable = [&](const GrowthFit& f) { return f.c * t_max >= 1.0; };
    auto better = [&](const GrowthFit& cand, const GrowthFit& cur) {
        if (resolvable(cand) != resolvable(cur)) return resolvable(cand);
        if (cand.converged != cur.converged) return cand.converged;
        return cand.residual < cur.residual;
    };

    GrowthFit best;
    bool have = false;
    int iterations = 0;
    for (double scale : {0.5, 2.0, 8.0, 32.0, 128.0}) {
        GrowthFit fit = fit_growth_from(t, y, a0, b0, scale / t_half);
        iterations += fit.iterations;
        if (!have || better(fit, best)) {
            best = fit;
            have = true;
        }
    }
    best.iterations = iterations;
    return best;
}

std::string_view scaling_kind_name(ScalingKind k) {
    switch (k) {
    case ScalingKind::PowerLaw: return "power_law";
    case ScalingKind::Exponential: return "exponential";
    case ScalingKind::Linear: return "linear";
    }
    return "linear";
}

namespace {

// r^2 of an OLS line in the regression's own coordinates. A constant target
// fitted exactly counts as a perfect fit.
double r_squared_of(const std::vector<double>& x, const std::vector<double>& y,
                    const LineFit& line) {
    std::size_t n = std::min(x.size(), y.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y[i];
    mean /= static_cast<double>(n);
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i] - (line.intercept + line.slope * x[i]);
        ss_res += r * r;
        double d = y[i] - mean;
        ss_tot += d * d;
    }
    if (ss_tot < 1e-300) return ss_res < 1e-300 ? 1.0 : 0.0;
    double r2 = 1.0 - ss_res / ss_tot;
    return std::clamp(r2, 0.0, 1.0);
}

} // namespace

ScalingFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    ScalingFit f;
    f.kind = ScalingKind::PowerLaw;
    std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return f;
    std::vector<double> lx, ly;
    lx.reserve(n);
    ly.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] <= 0.0 || y[i] <= 0.0) return f;
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    LineFit line = linear_fit(lx, ly);
    f.exponent_or_rate = line.slope;
    f.coefficient = std::exp(line.intercept);
    f.r_squared = r_squared_of(lx, ly, line);
    f.valid = true;
    return f;
}

ScalingFit fit_exponential(const std::vector<double>& x, const std::vector<double>& y) {
    ScalingFit f;
    f.kind = ScalingKind::Exponential;
    std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return f;
    std::vector<double> ly;
    ly.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] <= 0.0) return f;
        ly.push_back(std::log(y[i]));
    }
    LineFit line = linear_fit(x, ly);
    f.exponent_or_rate = line.slope;
    f.coefficient = std::exp(line.intercept);
    f.r_squared = r_squared_of(x, ly, line);
    f.valid = true;
    return f;
}

ScalingFit fit_linear_scaling(const std::vector<double>& x, const std::vector<double>& y) {
    ScalingFit f;
    f.kind = ScalingKind::Linear;
    std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return f;
    LineFit line = linear_fit(x, y);
    f.exponent_or_rate = line.slope;
    f.coefficient = line.intercept;
    f.r_squared = r_squared_of(x, y, line);
    f.valid = true;
    return f;
}

double fitted_long_term_rate(const GrowthFit& fit) {
    if (!fit.converged)
        throw std::invalid_argument("long-term rate requested from an unconverged fit");
    return fit.a;
}

FormsEstimate forms_to_kill(std::vector<SweepPoint> table, double deadline_minutes,
                            double quota_ratio) {
    FormsEstimate est;
    std::erase_if(table, [](const SweepPoint& p) { return p.forms <= 0.0 || p.kill_minutes <= 0.0; });
    if (table.empty() || deadline_minutes <= 0.0 || quota_ratio <= 0.0) return est;
    std::sort(table.begin(), table.end(),
              [](const SweepPoint& l, const SweepPoint& r) { return l.forms < r.forms; });
    for (auto& p : table) p.kill_minutes *= quota_ratio;

    // Every tabulated attack fills the box eventually, so a deadline looser
    // than the smallest attack's fill time is already met by that attack.
    if (deadline_minutes >= table.front().kill_minutes) {
        est.forms = table.front().forms;
        est.extrapolated = deadline_minutes > table.front().kill_minutes;
        return est;
    }

    double ld = std::log(deadline_minutes);
    if (table.size() == 1) {
        // One sample: assume fill time inversely proportional to attack size.
        est.forms = table[0].forms * table[0].kill_minutes / deadline_minutes;
        est.extrapolated = true;
        return est;
    }

    auto interp = [&](const SweepPoint& lo, const SweepPoint& hi) {
        double x0 = std::log(lo.forms), x1 = std::log(hi.forms);
        double y0 = std::log(lo.kill_minutes), y1 = std::log(hi.kill_minutes);
        if (std::fabs(y1 - y0) < 1e-12) return 0.5 * (x0 + x1);
        return x0 + (ld - y0) * (x1 - x0) / (y1 - y0);
    };

    for (std::size_t i = 0; i + 1 < table.size(); ++i) {
        double k0 = table[i].kill_minutes;
        double k1 = table[i + 1].kill_minutes;
        if ((k0 - deadline_minutes) * (k1 - deadline_minutes) <= 0.0) {
            est.forms = std::exp(interp(table[i], table[i + 1]));
            return est;
        }
    }

    // Tighter than the largest measured attack: continue the final segment.
    est.extrapolated = true;
    est.forms = std::exp(interp(table[table.size() - 2], table.back()));
    return est;
}

} // namespace formflood
