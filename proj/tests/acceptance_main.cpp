// End-to-end gate for the whole pipeline: harvest -> simulate -> fit ->
// sweep -> calibrate -> defend -> prevent. Eleven checks, one [PASS]/[FAIL]
// line each; the exit code is the number of failures. Tolerances are pinned
// here, not configurable, so a run either meets the bar or shows exactly
// where it does not.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "formflood/commands.hpp"
#include "formflood/defense.hpp"
#include "formflood/dist.hpp"
#include "formflood/fit.hpp"
#include "formflood/forms.hpp"
#include "formflood/prevention.hpp"
#include "formflood/rng.hpp"
#include "formflood/scenario.hpp"
#include "formflood/sim.hpp"

using namespace formflood;
namespace fs = std::filesystem;

namespace {

const std::string kData = FORMFLOOD_TEST_DATA_DIR;

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("formflood-gate-" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// A criterion body reports its measurements through `detail` and returns
// overall success. Bodies may throw; the runner scores that as a failure.
using Criterion = std::function<bool(std::string& detail)>;

int g_failed = 0;

void run_criterion(int index, const char* title, const Criterion& body) {
    std::string detail;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %2d. %s — %s (%.1f s)\n", ok ? "PASS" : "FAIL", index, title,
                detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!ok) ++g_failed;
}

// --- Shared fixtures ---------------------------------------------------------

std::vector<double> geometric_times(int n, double lo, double hi) {
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return t;
}

double median_of(std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// The scaling sweeps are shared between the exponent and crossing checks.
struct SweepPair {
    SweepResult with_resales;
    SweepResult without_resales;
};

const SweepPair& scaling_sweeps() {
    static const SweepPair pair = [] {
        const std::vector<long> ladder = {512, 1024, 2048, 4096};
        AttackConfig base = calibrated_preset();
        SweepPair out;
        out.with_resales = sweep(base, ladder, 20);
        AttackConfig quiet = base;
        for (auto& entry : quiet.mix) entry.behavior.resale_prob = 0.0;
        out.without_resales = sweep(quiet, ladder, 20);
        return out;
    }();
    return pair;
}

double kill_exponent(const SweepResult& result) {
    std::vector<double> f, kill;
    for (const auto& row : result.rows) {
        if (row.killed_replications == 0 || !std::isfinite(row.mean_kill_minutes)) continue;
        f.push_back(static_cast<double>(row.forms));
        kill.push_back(row.mean_kill_minutes);
    }
    const ScalingFit fit = fit_power_law(f, kill);
    if (!fit.valid) throw std::runtime_error("power-law fit degenerate");
    return fit.exponent_or_rate;
}

// --- Criteria ----------------------------------------------------------------

bool harvest_rate_check(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const HarvestStats stats = harvest_corpus(kData + "/corpus", Lexicons::defaults());
    const double secs = seconds_since(t0);
    detail = fmt("rate=%.3f over %d pages in %.2f s (need exactly 0.400, < 5 s)",
                 stats.harvest_rate(), stats.pages_scanned, secs);
    return stats.harvest_rate() == 0.40 && secs < 5.0;
}

bool fit_recovery_check(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto t = geometric_times(200, 0.05, 240.0);

    double worst_clean = 0.0;
    std::vector<double> noisy_a, noisy_b, noisy_c;
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng(mix_seed(1001, trial));
        const double a = uniform_range(rng, 0.05, 5.0);
        const double b = uniform_range(rng, 5.0, 50.0);
        const double c = uniform_range(rng, 0.02, 0.5);
        std::vector<double> y(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) y[i] = eval_growth(a, b, c, t[i]);

        const GrowthFit clean = fit_growth(t, y);
        if (!clean.converged) {
            detail = fmt("noiseless trial %d failed to converge", trial);
            return false;
        }
        worst_clean = std::max({worst_clean, std::fabs(clean.a - a) / a,
                                std::fabs(clean.b - b) / b, std::fabs(clean.c - c) / c});

        for (auto& v : y) v *= 1.0 + 0.05 * sample_standard_normal(rng);
        const GrowthFit noisy = fit_growth(t, y);
        noisy_a.push_back(std::fabs(noisy.a - a) / a);
        noisy_b.push_back(std::fabs(noisy.b - b) / b);
        noisy_c.push_back(std::fabs(noisy.c - c) / c);
    }
    const double med_a = median_of(noisy_a);
    const double med_b = median_of(noisy_b);
    const double med_c = median_of(noisy_c);
    const double secs = seconds_since(t0);
    detail = fmt("noiseless worst=%.2e (need <1e-3); 5%%-noise medians a=%.1f%% b=%.1f%% "
                 "c=%.1f%% (need <10%%); %.1f s (need <10 s)",
                 worst_clean, med_a * 100, med_b * 100, med_c * 100, secs);
    return worst_clean < 1e-3 && med_a < 0.10 && med_b < 0.10 && med_c < 0.10 && secs < 10.0;
}

bool jacobian_check(std::string& detail) {
    Rng rng(4242);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        double p[3] = {uniform_range(rng, 0.05, 5.0), uniform_range(rng, 5.0, 50.0),
                       uniform_range(rng, 0.02, 0.5)};
        const double t = uniform_range(rng, 0.1, 240.0);
        const auto row = growth_jacobian_row(p[0], p[1], p[2], t);
        for (int k = 0; k < 3; ++k) {
            const double h = 1e-6 * std::max(1.0, std::fabs(p[k]));
            const double save = p[k];
            p[k] = save + h;
            const double up = eval_growth(p[0], p[1], p[2], t);
            p[k] = save - h;
            const double dn = eval_growth(p[0], p[1], p[2], t);
            p[k] = save;
            const double fd = (up - dn) / (2.0 * h);
            worst = std::max(worst, std::fabs(row[k] - fd) / std::max(1.0, std::fabs(fd)));
        }
    }
    detail = fmt("worst relative disagreement %.2e over 100 random points (need <1e-6)", worst);
    return worst < 1e-6;
}

bool kill_ordering_check(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const AttackConfig base = calibrated_preset();
    constexpr int kReps = 20;
    constexpr int kNeed = 18;

    auto ordered_reps = [&](long forms, bool expect_kill_before_attack) {
        int ok = 0;
        for (int rep = 0; rep < kReps; ++rep) {
            AttackConfig config = base;
            config.num_forms = forms;
            config.seed = mix_seed(base.seed, static_cast<std::uint64_t>(forms),
                                   static_cast<std::uint64_t>(rep));
            const AttackOutcome outcome = run_attack(config);
            if (!outcome.kill_time) continue; // never filled: attack finished first
            const bool before = *outcome.kill_time < outcome.attack_time;
            if (before == expect_kill_before_attack) ++ok;
        }
        return ok;
    };

    const int big = ordered_reps(3911, true);
    const int s514 = ordered_reps(514, false);
    const int s1026 = ordered_reps(1026, false);
    const int s2050 = ordered_reps(2050, false);
    const double secs = seconds_since(t0);
    detail = fmt("kill<attack at F=3911 in %d/20; kill>attack at 514/1026/2050 in %d/%d/%d of 20 "
                 "(need >=18 each); %.1f s (need <60 s)",
                 big, s514, s1026, s2050, secs);
    return big >= kNeed && s514 >= kNeed && s1026 >= kNeed && s2050 >= kNeed && secs < 60.0;
}

bool calibrated_rate_check(std::string& detail) {
    TempDir tmp;
    std::ostringstream sink;
    cli::CommandIO io{sink, sink};
    if (cli::run_calibrate(0.06, 0.20, tmp.path.string(), io) != 0) {
        detail = "calibration search failed to land inside tolerance";
        return false;
    }
    const Scenario calibrated = load_scenario((tmp.path / "calibrated-scenario.json").string());

    double mean[3] = {0, 0, 0};
    const long sizes[3] = {512, 1024, 2048};
    for (int s = 0; s < 3; ++s) {
        double sum = 0.0;
        for (int rep = 0; rep < 10; ++rep) {
            AttackConfig config = calibrated.attack;
            config.num_forms = sizes[s];
            config.seed = mix_seed(424242, static_cast<std::uint64_t>(sizes[s]),
                                   static_cast<std::uint64_t>(rep));
            const AttackOutcome outcome = run_attack(config);
            const GrowthFit fit =
                fit_series_decimated(outcome.arrivals, SeriesChannel::Messages, 1500);
            if (!fit.converged) {
                detail = fmt("rate fit unconverged at F=%ld rep %d", sizes[s], rep);
                return false;
            }
            sum += fitted_long_term_rate(fit) / static_cast<double>(sizes[s]);
        }
        mean[s] = sum / 10.0;
    }
    detail = fmt("mean fitted rate/form over 10 reps: %.4f / %.4f / %.4f at F=512/1024/2048 "
                 "(need within 20%% of 0.06)",
                 mean[0], mean[1], mean[2]);
    for (double m : mean)
        if (std::fabs(m / 0.06 - 1.0) > 0.20) return false;
    return true;
}

bool kill_scaling_check(std::string& detail) {
    const SweepPair& sweeps = scaling_sweeps();
    const double with_resales = kill_exponent(sweeps.with_resales);
    const double without = kill_exponent(sweeps.without_resales);
    detail = fmt("kill-time exponent %.3f with resales (need in [-4.0,-2.5]), %.3f without "
                 "(need in [-1.15,-0.85])",
                 with_resales, without);
    const bool on_ok = with_resales >= -4.0 && with_resales <= -2.5;
    const bool off_ok = without >= -1.15 && without <= -0.85;
    return on_ok && off_ok;
}

bool crossing_check(std::string& detail) {
    const auto crossing = crossing_estimate(scaling_sweeps().with_resales, 116.0);
    if (!crossing) {
        detail = "sweep never brackets the attack-time/kill-time crossing";
        return false;
    }
    detail = fmt("crossing at F=%.0f (need within a factor of 2 of 4096: [2048, 8192])",
                 *crossing);
    return *crossing >= 2048.0 && *crossing <= 8192.0;
}

bool sms_quota_check(std::string& detail) {
    AttackConfig config = sms_preset();
    config.num_forms = 200;
    const AttackOutcome outcome = run_attack(config);
    if (!outcome.kill_time) {
        detail = "the 80-message box never filled";
        return false;
    }
    detail = fmt("box killed holding %ld messages at %.3f min (need exactly 80, < 1 min)",
                 outcome.final_state.message_count, *outcome.kill_time);
    return outcome.final_state.message_count == 80 && *outcome.kill_time < 1.0;
}

bool prevention_soundness_check(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const AdversaryReport report = run_adversary_suite(DomainRegistry{}, 10000, 424242);

    // Exhaustive small model: five binary checks, 32 situations, exactly one
    // of which may be accepted (right nonce, unexpired, matching sender and
    // origin, no relay).
    SubmissionRequest form;
    form.action = "https://pad.example/subscribe";
    form.method = "post";
    form.payload = {{"email", "user@home.example"}};
    form.source_page = "pad.example/index.html";
    DomainRegistry reg;
    reg.authorized_server["home.example"] = "smtp.home.example";
    reg.authorized_server["far.example"] = "smtp.far.example";
    int accepted = 0;
    for (int mask = 0; mask < 32; ++mask) {
        ChallengeAuthority site(5000 + mask);
        const auto ch = site.issue_challenge(form, "user@home.example", 0.0, 100.0);
        ValidationEmail email;
        email.claimed_sender = (mask & 8) ? "user@home.example" : "other@home.example";
        email.originating_server = (mask & 4) ? "smtp.home.example" : "smtp.far.example";
        email.via_open_relay = mask & 1;
        email.nonce_presented =
            (mask & 2) ? ch.nonce : Nonce{0xDEAD, static_cast<std::uint64_t>(mask)};
        if (site.verify(email, reg, (mask & 16) ? 100.0 : 50.0).verdict == Verdict::Accepted)
            ++accepted;
    }
    const double secs = seconds_since(t0);
    detail = fmt("10k trials/adversary: false_accepts=%ld false_rejects=%ld; small model "
                 "accepts %d/32 situations (need 0, 0, exactly 1); %.1f s (need <30 s)",
                 report.false_accepts, report.false_rejects, accepted, secs);
    return report.false_accepts == 0 && report.false_rejects == 0 && accepted == 1 &&
           secs < 30.0;
}

bool cleaner_safety_check(std::string& detail) {
    constexpr double kDay = 24.0 * 60.0;

    // 1,000 randomized traces: no message from a current book member may be
    // removed under the individual persona, and a second cleanup pass over
    // the same suspects must be a no-op.
    Rng rng(20260401);
    long removed_members = 0;
    long second_pass_removals = 0;
    for (int trace = 0; trace < 1000; ++trace) {
        ExtendedAddressBook book;
        std::vector<std::string> members;
        for (int j = 0; j < 20; ++j) {
            members.push_back("user" + std::to_string(j) + "@home.example");
            const double stamp = uniform01(rng) < 0.25
                                     ? -uniform_range(rng, 31.0 * kDay, 60.0 * kDay)
                                     : -uniform_range(rng, 0.0, 20.0 * kDay);
            book.record_contact(members.back(), stamp);
        }
        std::vector<InboundMessage> window;
        for (long i = 0; i < 30; ++i) {
            std::string sender = uniform01(rng) < 0.5
                                     ? members[uniform_index(rng, members.size())]
                                     : "spam" + std::to_string(i) + "@pad.example";
            window.push_back(make_message(i, std::move(sender),
                                          uniform_range(rng, 50.0, 99999.0),
                                          uniform_range(rng, 0.0, 100.0), rng() % 64,
                                          Origin::Attack));
        }
        const std::vector<InboundMessage> by_id = window; // ids equal creation index
        std::sort(window.begin(), window.end(),
                  [](const InboundMessage& a, const InboundMessage& b) {
                      return a.arrival < b.arrival;
                  });
        CleanerPolicy policy;
        if (uniform01(rng) < 0.3) policy.min_suspect_size = 1000.0;

        const Partition part = mark_suspects(window, book, policy);
        Inbox inbox;
        for (const auto& m : window) inbox.add(m);
        const RemovalReport report = cleanup(inbox, part.suspect, policy);
        for (long id : report.removed_ids) {
            const auto& m = by_id[static_cast<std::size_t>(id)];
            if (book.knows(m.sender_address, m.arrival)) ++removed_members;
        }
        const RemovalReport again = cleanup(inbox, part.suspect, policy);
        second_pass_removals += again.removed_count;
    }

    // Meter monotone in each feature over 500 random triples.
    Rng mrng(20260819);
    int violations = 0;
    for (int trial = 0; trial < 500; ++trial) {
        MeterFeatures f;
        f.rate_ratio = std::exp(uniform_range(mrng, std::log(0.1), std::log(100.0)));
        f.unknown_fraction = uniform01(mrng);
        f.duplicate_fraction = uniform01(mrng);
        const double p = meter_probability(f);
        MeterFeatures up = f;
        up.rate_ratio += uniform_range(mrng, 0.0, 50.0);
        if (meter_probability(up) < p) ++violations;
        up = f;
        up.unknown_fraction = std::min(1.0, f.unknown_fraction + uniform01(mrng));
        if (meter_probability(up) < p) ++violations;
        up = f;
        up.duplicate_fraction = std::min(1.0, f.duplicate_fraction + uniform01(mrng));
        if (meter_probability(up) < p) ++violations;
    }

    detail = fmt("1000 traces: %ld current-member removals, %ld second-pass removals; "
                 "meter monotonicity violations %d/1500 (need 0, 0, 0)",
                 removed_members, second_pass_removals, violations);
    return removed_members == 0 && second_pass_removals == 0 && violations == 0;
}

bool determinism_check(std::string& detail) {
    TempDir tmp;
    auto run_everything = [&](const std::string& root) -> bool {
        std::ostringstream sink;
        cli::CommandIO io{sink, sink};
        bool ok = true;
        ok &= cli::run_harvest(kData + "/corpus", root + "/harvest/pads.jsonl", io) == 0;
        ok &= cli::run_simulate(kData + "/scenarios/flood-F1026.json", 300, std::nullopt,
                                root + "/sim", io) == 0;
        ok &= cli::run_fit(root + "/sim/arrivals.csv", "messages", root + "/fit", io) == 0;
        ok &= cli::run_sweep(kData + "/scenarios/default.json", {200, 400}, 2, std::nullopt,
                             root + "/sweep", io) == 0;
        ok &= cli::run_calibrate(0.06, 0.20, root + "/cal", io) == 0;
        ok &= cli::run_defend(kData + "/scenarios/individual.json", std::nullopt,
                              root + "/defend", io) == 0;
        ok &= cli::run_prevent(500, 424242, std::nullopt, root + "/prevent", io) == 0;
        return ok;
    };
    auto digests = [&](const fs::path& root) {
        std::map<std::string, std::uint64_t> out;
        for (const auto& entry : fs::recursive_directory_iterator(root))
            if (entry.is_regular_file())
                out[fs::relative(entry.path(), root).string()] = fnv1a(slurp(entry.path()));
        return out;
    };

    const std::string a = (tmp.path / "a").string();
    const std::string b = (tmp.path / "b").string();
    if (!run_everything(a) || !run_everything(b)) {
        detail = "a subcommand exited nonzero";
        return false;
    }
    const auto da = digests(a);
    const auto db = digests(b);
    int mismatched = 0;
    for (const auto& [rel, digest] : da) {
        const auto it = db.find(rel);
        if (it == db.end() || it->second != digest) ++mismatched;
    }
    detail = fmt("%zu files per run across all seven subcommands, %d digest mismatches "
                 "(need 0)",
                 da.size(), mismatched);
    return !da.empty() && da.size() == db.size() && mismatched == 0;
}

} // namespace

int main() {
    std::printf("flood-simulator acceptance gate\n");
    run_criterion(1, "corpus harvest rate", harvest_rate_check);
    run_criterion(2, "growth-model parameter recovery", fit_recovery_check);
    run_criterion(3, "analytic jacobian versus central differences", jacobian_check);
    run_criterion(4, "burst kill ordering at the four bundled sizes", kill_ordering_check);
    run_criterion(5, "calibrated per-form arrival rate", calibrated_rate_check);
    run_criterion(6, "kill-time scaling with and without resales", kill_scaling_check);
    run_criterion(7, "attack-time/kill-time crossing size", crossing_check);
    run_criterion(8, "text-message box fills at its 80-message quota", sms_quota_check);
    run_criterion(9, "validation protocol soundness", prevention_soundness_check);
    run_criterion(10, "cleaner whitelist safety and meter monotonicity", cleaner_safety_check);
    run_criterion(11, "byte-identical reruns across every subcommand", determinism_check);
    std::printf("%d of 11 checks passed\n", 11 - g_failed);
    return g_failed;
}
