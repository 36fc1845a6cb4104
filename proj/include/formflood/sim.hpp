#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "formflood/dist.hpp"
#include "formflood/fit.hpp"

namespace formflood {

// Stochastic response profile of one class of harvested site. A site that
// received a victim's address may answer immediately (confirmations), mail on
// a schedule (newsletters), re-send acknowledgment requests, and — the
// amplification mechanism — resell the address, spawning standalone spam
// sources that keep mailing on their own.
struct SiteBehavior {
    std::string name;

    double immediate_prob = 0.0;
    Dist immediate_delay = Dist::constant(0.5); // minutes after form submission
    Dist message_size = Dist::constant(4096.0); // bytes per message

    std::optional<double> periodic_interval;    // minutes between mailings

    int ack_retries = 0;        // re-sent acknowledgment requests...
    double ack_interval = 0.0;  // ...this many minutes apart, after the first

    double resale_prob = 0.0;        // chance the address is resold once
    Dist resale_delay = Dist::constant(60.0); // minutes until the resale
    int resale_spawn_count = 0;      // spam sources created by the resale
    Dist spam_interval = Dist::constant(360.0); // gap between a source's mailings
    Dist spam_size = Dist::constant(4096.0);    // bytes per spam message
};

struct BehaviorMixEntry {
    SiteBehavior behavior;
    double weight = 0.0;
};

struct AttackConfig {
    long num_forms = 0;      // F
    double fill_rate = 116.0; // forms filled per minute
    std::vector<BehaviorMixEntry> mix; // weights must sum to 1
    double quota = 2.0 * 1024.0 * 1024.0; // bytes; messages when sms_mode
    bool sms_mode = false;
    double horizon_minutes = 0.0; // <= 0 selects the default settling horizon
    std::uint64_t seed = 0;
};

// Validate config invariants; returns a human-readable complaint or nothing.
std::optional<std::string> validate_config(const AttackConfig& config);

// The horizon actually simulated: the configured one, or, when unset,
// 4 * attack_time + 48 h so the long-term rate has room to settle.
double resolved_horizon(const AttackConfig& config);

struct MailboxState {
    long message_count = 0;
    double total_bytes = 0.0;
    long bounced_count = 0; // deliveries refused after the box filled
    std::optional<double> killed_at;
};

struct SeriesSample {
    double t = 0.0; // minutes since attack start
    long messages = 0;
    double bytes = 0.0;
};

// Cumulative trajectory sampled at delivery events. Samples landing on the
// same timestamp coalesce into the final state at that instant, keeping
// timestamps strictly increasing and both columns non-decreasing.
struct TimeSeries {
    std::vector<SeriesSample> samples;
};

struct AttackOutcome {
    TimeSeries series;   // accepted mail only; flat after the box fills
    TimeSeries arrivals; // every delivery attempt, including bounced ones
    double attack_time = 0.0; // num_forms / fill_rate, exactly
    std::optional<double> kill_time;
    MailboxState final_state;
    long total_deliveries = 0;
    double horizon_minutes = 0.0; // resolved horizon used for the run
    std::vector<std::string> warnings;
};

// Simulate one attack: form i is submitted at i / fill_rate; every response,
// scheduled mailing, acknowledgment retry, and resale-spawned spam message is
// generated out to the horizon, then replayed in (time, creation-order)
// priority against the quota-bounded mailbox. The delivery crossing the quota
// is accepted; everything after it bounces. Deterministic for a given config:
// each form draws from its own seed-derived stream, so enlarging the attack
// leaves the behavior of existing forms untouched.
// Throws std::invalid_argument when validate_config complains.
AttackOutcome run_attack(const AttackConfig& config);

// Earliest sample at which the byte series reaches the quota.
std::optional<double> kill_time_of(const TimeSeries& series, double quota_bytes);

enum class SeriesChannel { Messages, Bytes };

std::string_view series_channel_name(SeriesChannel c);

// Fit the saturating-ramp growth model to one channel of a trajectory.
// Throws std::invalid_argument with fewer than 4 samples; identically-zero
// series yield converged = false per the fitter's convention.
GrowthFit fit_series(const TimeSeries& series, SeriesChannel channel);

// Same, but thinned to at most max_points evenly-strided samples first;
// fitting cost is linear in samples and long runs carry hundreds of
// thousands, far past the point of diminishing returns for 3 parameters.
GrowthFit fit_series_decimated(const TimeSeries& series, SeriesChannel channel,
                               std::size_t max_points);

// Arrival rate (messages per minute) over the settling window: least-squares
// slope of cumulative arrivals across the final half of the horizon. Uses the
// arrivals series because mail keeps arriving (and bouncing) after a kill.
double measured_long_term_rate(const TimeSeries& arrivals, double horizon_minutes);

struct SweepRow {
    long forms = 0;
    double mean_kill_minutes = 0.0; // over killed replications only; NaN if none
    double mean_rate_per_min = 0.0; // measured arrival-slope rate, all replications
    double mean_fitted_rate = 0.0;  // growth-model long-run rate (messages channel)
    int replications = 0;
    int killed_replications = 0;
    double attack_time = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

// Replicated attack sizes F with per-replication derived seeds. Each run's
// horizon is at least the settling default so rates are comparable across F.
SweepResult sweep(const AttackConfig& base, const std::vector<long>& f_values,
                  int replications);

// Attack size at which mean kill time crosses attack time (kill becomes
// faster than the filling itself), interpolated between adjacent sweep rows
// on a log-F axis. Absent when the sweep never brackets a crossing.
std::optional<double> crossing_estimate(const SweepResult& result, double fill_rate);

// Baseline behavior mix: immediate responders, daily newsletters,
// acknowledgment retriers, inert sites; one-in-ten addresses resold to a
// pair of slow spam sources.
std::vector<BehaviorMixEntry> default_mix();

// Tuned mix whose long-run arrival rate settles near 0.06 messages per
// minute per form: brisker newsletters, quick resales feeding a pair of
// steady spam sources per resold address. Shipped as the calibrated
// scenario and reproduced by the calibration search.
std::vector<BehaviorMixEntry> calibrated_mix();

// Full attack setup around calibrated_mix(): 116 forms/min against a 2 MiB
// mailbox quota.
AttackConfig calibrated_preset();

// Text-message variant: tiny fixed-size messages, immediate-only responders,
// and a quota counted in messages. A typical handset inbox holds ~80.
AttackConfig sms_preset();

// CSV exports (fixed formatting so identical runs serialize identically).
std::string series_to_csv(const TimeSeries& series);                 // t_minutes,messages,bytes
std::string sweep_to_csv(const SweepResult& result);                 // F,mean_kill_minutes,mean_rate_per_min,replications
std::string fit_report_csv(SeriesChannel channel, const GrowthFit& fit); // channel,a,b,c,residual,converged,iterations
std::string scaling_report_csv(const std::vector<std::pair<ScalingFit, int>>& fits); // kind,coefficient,exponent_or_rate,r_squared,n_points

} // namespace formflood
