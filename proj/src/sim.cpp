#include "formflood/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "formflood/rng.hpp"

namespace formflood {

namespace {

constexpr std::uint64_t kFormStreamTag = 0x666f726dULL; // per-form stream domain

struct Delivery {
    double t;
    double size;
};

const SiteBehavior& pick_behavior(const std::vector<BehaviorMixEntry>& mix,
                                  const std::vector<double>& cumulative, double u) {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
    if (idx >= mix.size()) idx = mix.size() - 1;
    return mix[idx].behavior;
}

void append_sample(TimeSeries& ts, double t, long messages, double bytes) {
    if (!ts.samples.empty() && ts.samples.back().t == t) {
        ts.samples.back().messages = messages;
        ts.samples.back().bytes = bytes;
    } else {
        ts.samples.push_back({t, messages, bytes});
    }
}

void append_row(std::string& out, const char* fmt, ...) {
    char buf[256];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    out += buf;
}

} // namespace

std::optional<std::string> validate_config(const AttackConfig& config) {
    if (config.num_forms < 0) return "num_forms must be non-negative";
    if (!(config.fill_rate > 0.0)) return "fill_rate must be positive";
    if (!(config.quota > 0.0)) return "quota must be positive";
    if (config.mix.empty()) return "behavior mix is empty";
    double total = 0.0;
    for (const auto& entry : config.mix) {
        if (entry.weight < 0.0) return "behavior weights must be non-negative";
        if (entry.behavior.immediate_prob < 0.0 || entry.behavior.immediate_prob > 1.0)
            return "immediate_prob must lie in [0, 1]";
        if (entry.behavior.resale_prob < 0.0 || entry.behavior.resale_prob > 1.0)
            return "resale_prob must lie in [0, 1]";
        if (entry.behavior.ack_retries < 0) return "ack_retries must be non-negative";
        if (entry.behavior.ack_retries > 0 && !(entry.behavior.ack_interval > 0.0))
            return "ack_interval must be positive when retries are configured";
        if (entry.behavior.periodic_interval && !(*entry.behavior.periodic_interval > 0.0))
            return "periodic_interval must be positive";
        if (entry.behavior.resale_spawn_count < 0)
            return "resale_spawn_count must be non-negative";
        total += entry.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9) return "behavior weights must sum to 1";
    return std::nullopt;
}

double resolved_horizon(const AttackConfig& config) {
    if (config.horizon_minutes > 0.0) return config.horizon_minutes;
    double attack_time = static_cast<double>(config.num_forms) / config.fill_rate;
    return 4.0 * attack_time + 48.0 * 60.0;
}

AttackOutcome run_attack(const AttackConfig& config) {
    if (auto complaint = validate_config(config)) {
        throw std::invalid_argument("attack config: " + *complaint);
    }

    AttackOutcome out;
    out.attack_time = static_cast<double>(config.num_forms) / config.fill_rate;
    out.horizon_minutes = resolved_horizon(config);
    const double horizon = out.horizon_minutes;

    if (horizon < out.attack_time) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "horizon (%.3f min) ends before the last form is filled (%.3f min)",
                      horizon, out.attack_time);
        out.warnings.emplace_back(buf);
    }

    std::vector<double> cumulative;
    cumulative.reserve(config.mix.size());
    double acc = 0.0;
    for (const auto& entry : config.mix) {
        acc += entry.weight;
        cumulative.push_back(acc);
    }

    std::vector<Delivery> deliveries;
    deliveries.reserve(static_cast<std::size_t>(config.num_forms) * 2 + 16);
    auto push = [&](double t, double size) {
        if (t <= horizon) deliveries.push_back({t, size});
    };

    for (long i = 1; i <= config.num_forms; ++i) {
        Rng rng(mix_seed(config.seed, kFormStreamTag, static_cast<std::uint64_t>(i)));
        const double submit = static_cast<double>(i) / config.fill_rate;
        const SiteBehavior& b = pick_behavior(config.mix, cumulative, uniform01(rng));

        if (b.immediate_prob > 0.0 && uniform01(rng) < b.immediate_prob) {
            const double first = submit + b.immediate_delay.sample(rng);
            push(first, b.message_size.sample(rng));
            for (int k = 1; k <= b.ack_retries; ++k) {
                const double retry = first + k * b.ack_interval;
                if (retry > horizon) break;
                push(retry, b.message_size.sample(rng));
            }
        }

        if (b.periodic_interval) {
            const double interval = *b.periodic_interval;
            for (long k = 1;; ++k) {
                const double t = submit + static_cast<double>(k) * interval;
                if (t > horizon) break;
                push(t, b.message_size.sample(rng));
            }
        }

        if (b.resale_prob > 0.0 && b.resale_spawn_count > 0 &&
            uniform01(rng) < b.resale_prob) {
            const double resold_at = submit + b.resale_delay.sample(rng);
            for (int s = 0; s < b.resale_spawn_count; ++s) {
                double t = resold_at;
                for (;;) {
                    t += b.spam_interval.sample(rng);
                    if (t > horizon) break;
                    push(t, b.spam_size.sample(rng));
                }
            }
        }
    }

    // Creation order is the tie-break for simultaneous deliveries, so a
    // stable sort on time alone reproduces (time, creation-seq) priority.
    std::stable_sort(deliveries.begin(), deliveries.end(),
                     [](const Delivery& x, const Delivery& y) { return x.t < y.t; });

    out.total_deliveries = static_cast<long>(deliveries.size());
    out.series.samples.reserve(deliveries.size());
    out.arrivals.samples.reserve(deliveries.size());

    MailboxState& box = out.final_state;
    long arrived_count = 0;
    double arrived_bytes = 0.0;
    for (const Delivery& d : deliveries) {
        ++arrived_count;
        arrived_bytes += d.size;
        append_sample(out.arrivals, d.t, arrived_count, arrived_bytes);
        if (box.killed_at) {
            ++box.bounced_count;
            continue;
        }
        ++box.message_count;
        box.total_bytes += d.size;
        append_sample(out.series, d.t, box.message_count, box.total_bytes);
        const bool full = config.sms_mode
                              ? static_cast<double>(box.message_count) >= config.quota
                              : box.total_bytes >= config.quota;
        if (full) box.killed_at = d.t;
    }
    out.kill_time = box.killed_at;
    return out;
}

std::optional<double> kill_time_of(const TimeSeries& series, double quota_bytes) {
    for (const SeriesSample& s : series.samples) {
        if (s.bytes >= quota_bytes) return s.t;
    }
    return std::nullopt;
}

std::string_view series_channel_name(SeriesChannel c) {
    switch (c) {
        case SeriesChannel::Messages: return "messages";
        case SeriesChannel::Bytes: return "bytes";
    }
    return "unknown";
}

namespace {

GrowthFit fit_samples(const std::vector<const SeriesSample*>& picked, SeriesChannel channel) {
    if (picked.size() < 4) {
        throw std::invalid_argument("series fit needs at least 4 samples");
    }
    std::vector<double> t, y;
    t.reserve(picked.size());
    y.reserve(picked.size());
    for (const SeriesSample* s : picked) {
        t.push_back(s->t);
        y.push_back(channel == SeriesChannel::Messages ? static_cast<double>(s->messages)
                                                       : s->bytes);
    }
    return fit_growth(t, y);
}

} // namespace

GrowthFit fit_series(const TimeSeries& series, SeriesChannel channel) {
    std::vector<const SeriesSample*> all;
    all.reserve(series.samples.size());
    for (const SeriesSample& s : series.samples) all.push_back(&s);
    return fit_samples(all, channel);
}

GrowthFit fit_series_decimated(const TimeSeries& series, SeriesChannel channel,
                               std::size_t max_points) {
    const std::size_t n = series.samples.size();
    if (max_points < 4) max_points = 4;
    if (n <= max_points) return fit_series(series, channel);
    std::vector<const SeriesSample*> picked;
    picked.reserve(max_points);
    for (std::size_t k = 0; k < max_points; ++k) {
        // Even stride that always includes the final sample.
        std::size_t idx = (k * (n - 1)) / (max_points - 1);
        picked.push_back(&series.samples[idx]);
    }
    return fit_samples(picked, channel);
}

double measured_long_term_rate(const TimeSeries& arrivals, double horizon_minutes) {
    const double window_start = horizon_minutes * 0.5;
    std::vector<double> t, y;
    for (const SeriesSample& s : arrivals.samples) {
        if (s.t >= window_start) {
            t.push_back(s.t);
            y.push_back(static_cast<double>(s.messages));
        }
    }
    if (t.size() < 2) return 0.0;
    return linear_fit(t, y).slope;
}

SweepResult sweep(const AttackConfig& base, const std::vector<long>& f_values,
                  int replications) {
    if (replications < 1) throw std::invalid_argument("sweep needs at least 1 replication");

    // Per-size configs resolved up front. Rates are comparable across F only
    // when every run gets the full settling window, so never shrink below the
    // default horizon.
    std::vector<AttackConfig> configs;
    configs.reserve(f_values.size());
    for (long f : f_values) {
        AttackConfig config = base;
        config.num_forms = f;
        AttackConfig probe = config;
        probe.horizon_minutes = 0.0;
        config.horizon_minutes = std::max(base.horizon_minutes, resolved_horizon(probe));
        configs.push_back(config);
    }

    // Replications fan out across a worker pool. Every (size, rep) task owns
    // a preallocated slot and derives its seed from (base seed, F, rep), so
    // the aggregate below is identical no matter which worker ran what.
    struct RunStats {
        std::optional<double> kill;
        double rate = 0.0;
        std::optional<double> fitted;
    };
    const std::size_t n_tasks = f_values.size() * static_cast<std::size_t>(replications);
    std::vector<RunStats> runs(n_tasks);
    std::atomic<std::size_t> next{0};
    std::once_flag failed_once;
    std::exception_ptr failure;

    auto worker = [&]() {
        try {
            for (std::size_t task = next.fetch_add(1); task < n_tasks;
                 task = next.fetch_add(1)) {
                const std::size_t fi = task / static_cast<std::size_t>(replications);
                const int rep = static_cast<int>(task % static_cast<std::size_t>(replications));
                AttackConfig config = configs[fi];
                config.seed = mix_seed(base.seed, static_cast<std::uint64_t>(config.num_forms),
                                       static_cast<std::uint64_t>(rep));
                const AttackOutcome outcome = run_attack(config);
                RunStats& slot = runs[task];
                slot.kill = outcome.kill_time;
                slot.rate = measured_long_term_rate(outcome.arrivals, outcome.horizon_minutes);
                if (outcome.arrivals.samples.size() >= 4) {
                    const GrowthFit fit = fit_series_decimated(outcome.arrivals,
                                                               SeriesChannel::Messages, 1500);
                    if (fit.converged) slot.fitted = fitted_long_term_rate(fit);
                }
            }
        } catch (...) {
            std::call_once(failed_once, [&] { failure = std::current_exception(); });
            next.store(n_tasks); // drain remaining tasks; results are discarded anyway
        }
    };

    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n_threads = std::min(hw, n_tasks);
    std::vector<std::thread> pool;
    pool.reserve(n_threads > 0 ? n_threads - 1 : 0);
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    SweepResult result;
    result.rows.reserve(f_values.size());
    for (std::size_t fi = 0; fi < f_values.size(); ++fi) {
        SweepRow row;
        row.forms = f_values[fi];
        row.replications = replications;
        row.attack_time = static_cast<double>(f_values[fi]) / base.fill_rate;
        double kill_sum = 0.0;
        double rate_sum = 0.0;
        double fitted_sum = 0.0;
        int fitted_n = 0;
        for (int rep = 0; rep < replications; ++rep) {
            const RunStats& slot = runs[fi * static_cast<std::size_t>(replications) +
                                        static_cast<std::size_t>(rep)];
            if (slot.kill) {
                kill_sum += *slot.kill;
                ++row.killed_replications;
            }
            rate_sum += slot.rate;
            if (slot.fitted) {
                fitted_sum += *slot.fitted;
                ++fitted_n;
            }
        }
        row.mean_kill_minutes = row.killed_replications > 0
                                    ? kill_sum / row.killed_replications
                                    : std::numeric_limits<double>::quiet_NaN();
        row.mean_rate_per_min = rate_sum / replications;
        row.mean_fitted_rate = fitted_n > 0 ? fitted_sum / fitted_n : 0.0;
        result.rows.push_back(row);
    }
    return result;
}

std::optional<double> crossing_estimate(const SweepResult& result, double fill_rate) {
    const auto& rows = result.rows;
    auto gap = [&](const SweepRow& row) {
        return row.mean_kill_minutes - static_cast<double>(row.forms) / fill_rate;
    };
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const SweepRow& lo = rows[i - 1];
        const SweepRow& hi = rows[i];
        if (lo.killed_replications == 0 || hi.killed_replications == 0) continue;
        const double g0 = gap(lo);
        const double g1 = gap(hi);
        if (g0 == 0.0) return static_cast<double>(lo.forms);
        if (g1 == 0.0) return static_cast<double>(hi.forms);
        if ((g0 > 0.0) == (g1 > 0.0)) continue;
        const double x0 = std::log(static_cast<double>(lo.forms));
        const double x1 = std::log(static_cast<double>(hi.forms));
        const double x = x0 + (x1 - x0) * (g0 / (g0 - g1));
        return std::exp(x);
    }
    return std::nullopt;
}

std::vector<BehaviorMixEntry> default_mix() {
    const Dist size = Dist::lognormal(4096.0, 1.0).clamped(200.0, 102400.0);

    SiteBehavior responder;
    responder.name = "responder";
    responder.immediate_prob = 1.0;
    responder.immediate_delay = Dist::exponential(0.5);
    responder.message_size = size;

    SiteBehavior newsletter;
    newsletter.name = "newsletter";
    newsletter.periodic_interval = 24.0 * 60.0;
    newsletter.message_size = size;

    SiteBehavior acker;
    acker.name = "acknowledger";
    acker.immediate_prob = 1.0;
    acker.immediate_delay = Dist::exponential(0.5);
    acker.message_size = size;
    acker.ack_retries = 3;
    acker.ack_interval = 12.0 * 60.0;

    SiteBehavior inert;
    inert.name = "inert";

    std::vector<BehaviorMixEntry> mix = {
        {responder, 0.25}, {newsletter, 0.30}, {acker, 0.25}, {inert, 0.20}};
    for (auto& entry : mix) {
        entry.behavior.resale_prob = 0.1;
        entry.behavior.resale_delay = Dist::uniform(60.0, 1440.0);
        entry.behavior.resale_spawn_count = 2;
        entry.behavior.spam_interval = Dist::constant(360.0);
        entry.behavior.spam_size = size;
    }
    return mix;
}

std::vector<BehaviorMixEntry> calibrated_mix() {
    const Dist reply_size = Dist::lognormal(170.0, 0.30).clamped(64.0, 512.0);

    SiteBehavior responder;
    responder.name = "responder";
    responder.immediate_prob = 1.0;
    responder.immediate_delay = Dist::exponential(0.5);
    responder.message_size = reply_size;

    SiteBehavior newsletter;
    newsletter.name = "newsletter";
    newsletter.periodic_interval = 150.0;
    newsletter.message_size = Dist::lognormal(900.0, 0.35).clamped(300.0, 3000.0);

    SiteBehavior acker;
    acker.name = "acknowledger";
    acker.immediate_prob = 1.0;
    acker.immediate_delay = Dist::exponential(0.75);
    acker.message_size = reply_size;
    acker.ack_retries = 2;
    acker.ack_interval = 360.0;

    SiteBehavior inert;
    inert.name = "inert";

    std::vector<BehaviorMixEntry> mix = {
        {responder, 0.25}, {newsletter, 0.30}, {acker, 0.25}, {inert, 0.20}};
    for (auto& entry : mix) {
        entry.behavior.resale_prob = 0.25;
        entry.behavior.resale_delay = Dist::exponential(4.0);
        entry.behavior.resale_spawn_count = 2;
        entry.behavior.spam_interval = Dist::exponential(8.6);
        entry.behavior.spam_size = Dist::lognormal(1290.0, 0.38).clamped(300.0, 5000.0);
    }
    return mix;
}

AttackConfig calibrated_preset() {
    AttackConfig config;
    config.fill_rate = 116.0;
    config.quota = 2.0 * 1024.0 * 1024.0;
    config.seed = 424242;
    config.mix = calibrated_mix();
    return config;
}

AttackConfig sms_preset() {
    SiteBehavior pinger;
    pinger.name = "sms-responder";
    pinger.immediate_prob = 1.0;
    pinger.immediate_delay = Dist::constant(1.0 / 30.0); // two seconds
    pinger.message_size = Dist::constant(140.0);

    AttackConfig config;
    config.num_forms = 200;
    config.fill_rate = 116.0;
    config.mix = {{pinger, 1.0}};
    config.quota = 80.0; // messages, not bytes
    config.sms_mode = true;
    config.horizon_minutes = 10.0;
    config.seed = 424242;
    return config;
}

std::string series_to_csv(const TimeSeries& series) {
    std::string out = "t_minutes,messages,bytes\n";
    out.reserve(out.size() + series.samples.size() * 32);
    for (const SeriesSample& s : series.samples) {
        append_row(out, "%.6f,%ld,%.1f\n", s.t, s.messages, s.bytes);
    }
    return out;
}

std::string sweep_to_csv(const SweepResult& result) {
    std::string out = "F,mean_kill_minutes,mean_rate_per_min,replications\n";
    for (const SweepRow& row : result.rows) {
        if (std::isnan(row.mean_kill_minutes)) {
            append_row(out, "%ld,nan,%.6f,%d\n", row.forms, row.mean_rate_per_min,
                       row.replications);
        } else {
            append_row(out, "%ld,%.4f,%.6f,%d\n", row.forms, row.mean_kill_minutes,
                       row.mean_rate_per_min, row.replications);
        }
    }
    return out;
}

std::string fit_report_csv(SeriesChannel channel, const GrowthFit& fit) {
    std::string out = "channel,a,b,c,residual,converged,iterations\n";
    append_row(out, "%s,%.8g,%.8g,%.8g,%.8g,%d,%d\n",
               std::string(series_channel_name(channel)).c_str(), fit.a, fit.b, fit.c,
               fit.residual, fit.converged ? 1 : 0, fit.iterations);
    return out;
}

std::string scaling_report_csv(const std::vector<std::pair<ScalingFit, int>>& fits) {
    std::string out = "kind,coefficient,exponent_or_rate,r_squared,n_points\n";
    for (const auto& [fit, n_points] : fits) {
        append_row(out, "%s,%.8g,%.8g,%.6f,%d\n",
                   std::string(scaling_kind_name(fit.kind)).c_str(), fit.coefficient,
                   fit.exponent_or_rate, fit.r_squared, n_points);
    }
    return out;
}

} // namespace formflood
