#include "formflood/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "formflood/defense.hpp"
#include "formflood/forms.hpp"
#include "formflood/prevention.hpp"
#include "formflood/scenario.hpp"
#include "formflood/sim.hpp"

namespace formflood::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buf[256];
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

// Writes atomically enough for our purposes; creates parent directories.
void write_file(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("short write to '" + path + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Maps a command body onto the exit-code contract: scenario/config problems
// are usage errors, anything else that throws is a runtime failure.
template <typename Body>
int guarded(CommandIO io, Body&& body) {
    try {
        return body();
    } catch (const ScenarioError& e) {
        io.err << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        io.err << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        io.err << e.what() << "\n";
        return kExitRuntime;
    }
}

std::string simulate_summary(const Scenario& sc, const AttackOutcome& outcome) {
    std::string text;
    text += "scenario=" + sc.name + "\n";
    text += fmt("forms=%ld\n", sc.attack.num_forms);
    text += fmt("fill_rate=%.6g\n", sc.attack.fill_rate);
    text += fmt("attack_time_minutes=%.6f\n", outcome.attack_time);
    text += outcome.kill_time ? fmt("kill_time_minutes=%.6f\n", *outcome.kill_time)
                              : "kill_time_minutes=none\n";
    text += fmt("horizon_minutes=%.6f\n", outcome.horizon_minutes);
    text += fmt("total_deliveries=%ld\n", outcome.total_deliveries);
    text += fmt("accepted_messages=%ld\n", outcome.final_state.message_count);
    text += fmt("accepted_bytes=%.1f\n", outcome.final_state.total_bytes);
    text += fmt("bounced=%ld\n", outcome.final_state.bounced_count);
    for (const auto& w : outcome.warnings) text += "warning=" + w + "\n";
    return text;
}

const char* kInboxPlot =
    "set datafile separator ','\n"
    "set xlabel 'minutes since attack start'\n"
    "set ylabel 'bytes'\n"
    "set key left top\n"
    "plot 'series.csv' using 1:3 with lines title 'inbox bytes', \\\n"
    "     'arrivals.csv' using 1:3 with lines title 'offered bytes'\n";

const char* kRatePlot =
    "set datafile separator ','\n"
    "set logscale x\n"
    "set xlabel 'attack size (forms)'\n"
    "set ylabel 'messages per minute'\n"
    "plot 'sweep.csv' using 1:3 with linespoints title 'arrival rate'\n";

std::string kill_plot(double fill_rate) {
    return fmt(
        "set datafile separator ','\n"
        "set logscale xy\n"
        "set xlabel 'attack size (forms)'\n"
        "set ylabel 'minutes'\n"
        "set key left bottom\n"
        "plot 'sweep.csv' using 1:2 with linespoints title 'time to fill inbox', \\\n"
        "     'sweep.csv' using 1:($1/%.6g) with lines title 'time to mount attack'\n",
        fill_rate);
}

} // namespace

int run_harvest(const std::string& corpus_dir, const std::string& out_file, CommandIO io) {
    return guarded(io, [&] {
        const HarvestStats stats = harvest_corpus(corpus_dir, Lexicons::defaults());
        write_file(out_file, launch_pads_to_jsonl(stats.launch_pads));
        io.out << fmt("harvest_rate=%.3f\n", stats.harvest_rate());
        return kExitOk;
    });
}

int run_simulate(const std::string& scenario_path, std::optional<long> forms,
                 std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
                 CommandIO io) {
    return guarded(io, [&] {
        Scenario sc = load_scenario(scenario_path);
        if (forms) sc.attack.num_forms = *forms;
        if (seed) sc.attack.seed = *seed;
        const std::string dir = out_dir.value_or(sc.outputs);

        const AttackOutcome outcome = run_attack(sc.attack);
        const std::string summary = simulate_summary(sc, outcome);
        write_file(dir + "/series.csv", series_to_csv(outcome.series));
        write_file(dir + "/arrivals.csv", series_to_csv(outcome.arrivals));
        write_file(dir + "/summary.txt", summary);
        write_file(dir + "/inbox.gp", kInboxPlot);
        io.out << summary;
        return kExitOk;
    });
}

int run_fit(const std::string& csv_path, const std::string& channel, const std::string& out_dir,
            CommandIO io) {
    return guarded(io, [&] {
        SeriesChannel ch;
        if (channel == "messages")
            ch = SeriesChannel::Messages;
        else if (channel == "bytes")
            ch = SeriesChannel::Bytes;
        else
            throw std::invalid_argument("unknown channel '" + channel +
                                        "' (expected messages or bytes)");

        const std::string text = read_file(csv_path);
        std::istringstream lines(text);
        std::string line;
        if (!std::getline(lines, line) || line != "t_minutes,messages,bytes")
            throw std::runtime_error(csv_path + ": not a series CSV (bad header)");
        TimeSeries series;
        for (int lineno = 2; std::getline(lines, line); ++lineno) {
            if (line.empty()) continue;
            SeriesSample s;
            int used = 0;
            if (std::sscanf(line.c_str(), "%lf,%ld,%lf%n", &s.t, &s.messages, &s.bytes, &used) !=
                    3 ||
                used != static_cast<int>(line.size()))
                throw std::runtime_error(fmt("%s:%d: malformed row", csv_path.c_str(), lineno));
            series.samples.push_back(s);
        }

        const GrowthFit fit = fit_series_decimated(series, ch, 1500);
        write_file(out_dir + "/fit.csv", fit_report_csv(ch, fit));
        io.out << fmt("channel=%s a=%.8g b=%.8g c=%.8g residual=%.8g converged=%s iterations=%d\n",
                      std::string(series_channel_name(ch)).c_str(), fit.a, fit.b, fit.c,
                      fit.residual, fit.converged ? "true" : "false", fit.iterations);
        return kExitOk;
    });
}

int run_sweep(const std::string& scenario_path, std::vector<long> f_values, int replications,
              std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
              CommandIO io) {
    return guarded(io, [&] {
        if (f_values.empty()) throw std::invalid_argument("sweep needs at least one --forms value");
        if (replications < 1) throw std::invalid_argument("replications must be >= 1");
        Scenario sc = load_scenario(scenario_path);
        if (seed) sc.attack.seed = *seed;
        const std::string dir = out_dir.value_or(sc.outputs);

        const SweepResult result = sweep(sc.attack, f_values, replications);

        std::vector<double> kill_f, kill_y, rate_f, rate_y;
        for (const auto& row : result.rows) {
            rate_f.push_back(static_cast<double>(row.forms));
            rate_y.push_back(row.mean_rate_per_min);
            if (row.killed_replications > 0 && std::isfinite(row.mean_kill_minutes)) {
                kill_f.push_back(static_cast<double>(row.forms));
                kill_y.push_back(row.mean_kill_minutes);
            }
        }
        // "Small F" = the smaller half of the swept sizes (at least two), where
        // the arrival rate still grows linearly before the quota bites.
        std::vector<std::pair<double, double>> by_f;
        for (std::size_t i = 0; i < rate_f.size(); ++i) by_f.emplace_back(rate_f[i], rate_y[i]);
        std::sort(by_f.begin(), by_f.end());
        const std::size_t small_n = std::max<std::size_t>(2, (by_f.size() + 1) / 2);
        std::vector<double> small_f, small_y;
        for (std::size_t i = 0; i < std::min(small_n, by_f.size()); ++i) {
            small_f.push_back(by_f[i].first);
            small_y.push_back(by_f[i].second);
        }

        const ScalingFit kill_fit = fit_power_law(kill_f, kill_y);
        const ScalingFit rate_fit = fit_exponential(rate_f, rate_y);
        const ScalingFit small_fit = fit_linear_scaling(small_f, small_y);
        const std::string scaling = scaling_report_csv({
            {kill_fit, static_cast<int>(kill_f.size())},
            {rate_fit, static_cast<int>(rate_f.size())},
            {small_fit, static_cast<int>(small_f.size())},
        });

        const auto crossing = crossing_estimate(result, sc.attack.fill_rate);
        std::string summary;
        summary += fmt("sizes=%zu\n", result.rows.size());
        summary += fmt("replications=%d\n", replications);
        summary += crossing ? fmt("crossing_forms=%.4f\n", *crossing) : "crossing_forms=none\n";

        write_file(dir + "/sweep.csv", sweep_to_csv(result));
        write_file(dir + "/scaling.csv", scaling);
        write_file(dir + "/sweep_summary.txt", summary);
        write_file(dir + "/kill_vs_F.gp", kill_plot(sc.attack.fill_rate));
        write_file(dir + "/rate_vs_F.gp", kRatePlot);
        io.out << scaling << summary;
        return kExitOk;
    });
}

int run_calibrate(double target, double tolerance, const std::string& out_dir, CommandIO io) {
    return guarded(io, [&] {
        if (!(target > 0.0)) throw std::invalid_argument("target rate must be positive");
        if (tolerance < 0.0) throw std::invalid_argument("tolerance must be >= 0");

        // The documented grid: mean spam gap (minutes) x resale probability x
        // sources spawned per resale. 36 points; candidates are ranked by the
        // analytic steady rate and the best few verified by simulation.
        const double gaps[] = {6.0, 8.6, 12.0, 17.2};
        const double probs[] = {0.15, 0.25, 0.35};
        const int spawns[] = {1, 2, 3};
        struct Candidate {
            double gap, prob;
            int spawn;
            double analytic;
        };
        std::vector<Candidate> grid;
        for (double g : gaps)
            for (double p : probs)
                for (int s : spawns)
                    // newsletter share 0.30 at a 150-minute period, plus the
                    // resale-driven spam flow p*s per gap.
                    grid.push_back({g, p, s, 0.30 / 150.0 + p * s / g});
        std::stable_sort(grid.begin(), grid.end(), [&](const Candidate& a, const Candidate& b) {
            return std::abs(a.analytic - target) < std::abs(b.analytic - target);
        });

        constexpr int kMaxVerified = 5;
        constexpr int kReps = 3;
        constexpr long kForms = 1024;
        double best_rate = 0.0;
        const Candidate* best = nullptr;

        for (int i = 0; i < kMaxVerified && i < static_cast<int>(grid.size()); ++i) {
            const Candidate& cand = grid[i];
            AttackConfig config = calibrated_preset();
            config.num_forms = kForms;
            for (auto& entry : config.mix) {
                entry.behavior.resale_prob = cand.prob;
                entry.behavior.resale_spawn_count = cand.spawn;
                entry.behavior.spam_interval = Dist::exponential(cand.gap);
            }

            double sum = 0.0;
            int fitted = 0;
            for (int rep = 0; rep < kReps; ++rep) {
                config.seed = mix_seed(424242, 0xca1ULL, rep);
                const AttackOutcome outcome = run_attack(config);
                const GrowthFit fit =
                    fit_series_decimated(outcome.arrivals, SeriesChannel::Messages, 1500);
                if (!fit.converged) continue;
                sum += fitted_long_term_rate(fit) / static_cast<double>(kForms);
                ++fitted;
            }
            if (fitted == 0) continue;
            const double rate = sum / fitted;
            io.out << fmt("candidate gap=%.1f resale_prob=%.2f spawn=%d analytic=%.4f "
                          "fitted_rate_per_form=%.4f\n",
                          cand.gap, cand.prob, cand.spawn, cand.analytic, rate);
            if (!best || std::abs(rate - target) < std::abs(best_rate - target)) {
                best = &cand;
                best_rate = rate;
            }
            if (std::abs(rate / target - 1.0) <= tolerance) {
                Scenario sc;
                sc.name = "calibrated-default";
                sc.attack = config;
                sc.attack.seed = 424242;
                write_file(out_dir + "/calibrated-scenario.json", scenario_to_json(sc));
                io.out << fmt("calibrated gap=%.1f resale_prob=%.2f spawn=%d "
                              "fitted_rate_per_form=%.4f target=%.4f\n",
                              cand.gap, cand.prob, cand.spawn, rate, target);
                return kExitOk;
            }
        }

        if (best)
            io.err << fmt("no grid point within %.0f%% of %.4f; best: gap=%.1f resale_prob=%.2f "
                          "spawn=%d fitted_rate_per_form=%.4f\n",
                          tolerance * 100.0, target, best->gap, best->prob, best->spawn,
                          best_rate);
        else
            io.err << "no grid point produced a converged rate fit\n";
        return kExitRuntime;
    });
}

int run_defend(const std::string& scenario_path, std::optional<std::uint64_t> seed,
               std::optional<std::string> out_dir, CommandIO io) {
    return guarded(io, [&] {
        Scenario sc = load_scenario(scenario_path);
        if (!sc.defense_policy)
            throw std::invalid_argument(scenario_path + ": scenario has no defense policy");
        if (!sc.legit_traffic)
            throw std::invalid_argument(scenario_path + ": scenario has no legitimate traffic");
        if (seed) sc.attack.seed = *seed;
        const std::string dir = out_dir.value_or(sc.outputs);

        const AttackOutcome outcome = run_attack(sc.attack);
        const auto legit =
            synthesize_legit_stream(0.0, outcome.horizon_minutes, sc.legit_traffic->rate_per_min,
                                    sc.legit_traffic->senders, sc.attack.seed);
        // The victim corresponds with the legitimate senders, so they are in
        // the book before the flood begins.
        ExtendedAddressBook book;
        for (const auto& sender : sc.legit_traffic->senders) book.record_contact(sender, 0.0);

        const DefenseMetrics metrics =
            evaluate_defense(outcome, legit, *sc.defense_policy, book, sc.evaluation);
        const std::string csv =
            metrics_csv(sc.defense_policy->persona, metrics, sc.evaluation.trigger_threshold);
        write_file(dir + "/defense.csv", csv);
        io.out << csv;
        io.out << fmt("attack_total=%ld legit_total=%ld removed_attack=%ld removed_legit=%ld "
                      "cleanups=%d\n",
                      metrics.attack_total, metrics.legit_total, metrics.removed_attack,
                      metrics.removed_legit, metrics.cleanups_triggered);
        return kExitOk;
    });
}

int run_prevent(long trials, std::uint64_t seed, std::optional<std::string> registry_path,
                const std::string& out_dir, CommandIO io) {
    return guarded(io, [&] {
        DomainRegistry registry;
        if (registry_path) {
            try {
                registry = load_registry(*registry_path);
            } catch (const std::exception& e) {
                // A bad registry file is a configuration problem, like a bad
                // scenario file.
                throw std::invalid_argument(e.what());
            }
        }
        const AdversaryReport report = run_adversary_suite(registry, trials, seed);
        write_file(out_dir + "/prevention_report.csv", adversary_report_csv(report));

        // One honest exchange, logged, as a worked example of the protocol.
        {
            ChallengeAuthority site(seed);
            DomainRegistry reg = registry;
            reg.authorized_server.emplace("home-isp.example", "smtp.home-isp.example");
            SubmissionRequest form;
            form.action = "https://launch-pad.example/subscribe";
            form.method = "post";
            form.payload = {{"email", "victim@home-isp.example"}};
            form.source_page = "trace";
            const auto ch = site.issue_challenge(form, "victim@home-isp.example", 0.0);
            site.verify(craft_email(reg, "victim@home-isp.example", "victim@home-isp.example",
                                    ch.nonce, 1.0),
                        reg, 1.0);
            write_file(out_dir + "/trace.tsv", trace_to_text(site.trace()));
        }

        io.out << fmt("trials_per_adversary=%ld\n", report.trials_per_adversary);
        io.out << fmt("false_accepts=%ld\n", report.false_accepts);
        io.out << fmt("false_rejects=%ld\n", report.false_rejects);
        io.out << fmt("insider_accepts=%ld%s\n", report.insider_accepts,
                      report.insider_risk_flagged
                          ? " (residual risk: same-server insider, accepted by design)"
                          : "");
        return report.false_accepts > 0 ? kExitSuiteFailed : kExitOk;
    });
}

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CommandIO io{out, err};
    CLI::App app{"Offline simulator of form-based inbox-flooding attacks and their defenses"};
    app.require_subcommand(1);

    auto* harvest = app.add_subcommand("harvest", "Scan a page corpus for launch-pad forms");
    std::string corpus, harvest_out;
    harvest->add_option("--corpus", corpus, "Directory of .html pages")->required();
    harvest->add_option("--out", harvest_out, "Output JSONL form database")->required();

    auto* simulate = app.add_subcommand("simulate", "Run one attack from a scenario file");
    std::string sim_scenario, sim_out;
    long sim_forms = 0;
    std::uint64_t sim_seed = 0;
    simulate->add_option("--scenario", sim_scenario, "Scenario JSON file")->required();
    simulate->add_option("--forms", sim_forms, "Override the attack size F");
    simulate->add_option("--seed", sim_seed, "Override the scenario seed");
    simulate->add_option("--out-dir", sim_out, "Output directory (default: scenario's)");

    auto* fit = app.add_subcommand("fit", "Fit the growth model to a series CSV");
    std::string fit_csv, fit_channel = "messages", fit_out = "out";
    fit->add_option("--series", fit_csv, "series.csv or arrivals.csv from simulate")->required();
    fit->add_option("--channel", fit_channel, "messages or bytes (default messages)");
    fit->add_option("--out-dir", fit_out, "Output directory (default out)");

    auto* sweep = app.add_subcommand("sweep", "Replicated sweep over attack sizes");
    std::string sweep_scenario, sweep_out;
    std::vector<long> sweep_forms;
    int sweep_reps = 20;
    std::uint64_t sweep_seed = 0;
    sweep->add_option("--scenario", sweep_scenario, "Base scenario JSON file")->required();
    sweep->add_option("--forms", sweep_forms, "Attack sizes, e.g. 512,1024,2048")
        ->required()
        ->delimiter(',');
    sweep->add_option("--reps", sweep_reps, "Replications per size (default 20)");
    sweep->add_option("--seed", sweep_seed, "Override the scenario seed");
    sweep->add_option("--out-dir", sweep_out, "Output directory (default: scenario's)");

    auto* calibrate = app.add_subcommand("calibrate", "Search the mix grid for a target rate");
    double cal_target = 0.06, cal_tolerance = 0.20;
    std::string cal_out = "out";
    calibrate->add_option("--target", cal_target, "Per-form long-run rate (default 0.06/min)");
    calibrate->add_option("--tolerance", cal_tolerance, "Relative tolerance (default 0.2)");
    calibrate->add_option("--out-dir", cal_out, "Output directory (default out)");

    auto* defend = app.add_subcommand("defend", "Replay an attack against a cleaner policy");
    std::string defend_scenario, defend_out;
    std::uint64_t defend_seed = 0;
    defend->add_option("--scenario", defend_scenario, "Scenario JSON file")->required();
    defend->add_option("--seed", defend_seed, "Override the scenario seed");
    defend->add_option("--out-dir", defend_out, "Output directory (default: scenario's)");

    auto* prevent = app.add_subcommand("prevent", "Run the validation-protocol adversary suite");
    long prevent_trials = 10000;
    std::uint64_t prevent_seed = 424242;
    std::string prevent_registry, prevent_out = "out";
    prevent->add_option("--trials", prevent_trials, "Trials per adversary (default 10000)");
    prevent->add_option("--seed", prevent_seed, "Suite seed (default 424242)");
    prevent->add_option("--registry", prevent_registry, "Domain registry JSON file");
    prevent->add_option("--out-dir", prevent_out, "Output directory (default out)");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (harvest->parsed()) return run_harvest(corpus, harvest_out, io);
    if (simulate->parsed())
        return run_simulate(
            sim_scenario,
            simulate->count("--forms") ? std::optional<long>(sim_forms) : std::nullopt,
            simulate->count("--seed") ? std::optional<std::uint64_t>(sim_seed) : std::nullopt,
            simulate->count("--out-dir") ? std::optional<std::string>(sim_out) : std::nullopt,
            io);
    if (fit->parsed()) return run_fit(fit_csv, fit_channel, fit_out, io);
    if (sweep->parsed())
        return run_sweep(
            sweep_scenario, sweep_forms, sweep_reps,
            sweep->count("--seed") ? std::optional<std::uint64_t>(sweep_seed) : std::nullopt,
            sweep->count("--out-dir") ? std::optional<std::string>(sweep_out) : std::nullopt, io);
    if (calibrate->parsed()) return run_calibrate(cal_target, cal_tolerance, cal_out, io);
    if (defend->parsed())
        return run_defend(
            defend_scenario,
            defend->count("--seed") ? std::optional<std::uint64_t>(defend_seed) : std::nullopt,
            defend->count("--out-dir") ? std::optional<std::string>(defend_out) : std::nullopt,
            io);
    if (prevent->parsed())
        return run_prevent(prevent_trials, prevent_seed,
                           prevent->count("--registry") ? std::optional<std::string>(prevent_registry)
                                                        : std::nullopt,
                           prevent_out, io);
    err << "no subcommand selected\n";
    return kExitUsage;
}

} // namespace formflood::cli
