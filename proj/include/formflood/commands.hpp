#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace formflood::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;       // bad flags, bad scenario, bad config
inline constexpr int kExitRuntime = 2;     // I/O or execution failure
inline constexpr int kExitSuiteFailed = 3; // validation suite saw a false accept

struct CommandIO {
    std::ostream& out;
    std::ostream& err;
};

// Every command is callable in-process (the binary is a thin wrapper), fully
// deterministic in its inputs, and touches nothing but the given paths.

// Scans a corpus directory, writes the launch-pad form database (JSON lines),
// and prints the harvest rate. No file is written when the scan fails.
int run_harvest(const std::string& corpus_dir, const std::string& out_file, CommandIO io);

// Runs one attack from a scenario file; writes series.csv, arrivals.csv,
// summary.txt, and inbox.gp into the output directory.
int run_simulate(const std::string& scenario_path, std::optional<long> forms,
                 std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
                 CommandIO io);

// Fits the saturating-ramp growth model to a series CSV (as written by
// run_simulate); writes fit.csv. Unconverged fits are reported, not failed.
int run_fit(const std::string& csv_path, const std::string& channel, const std::string& out_dir,
            CommandIO io);

// Replicated attack-size sweep; writes sweep.csv, scaling.csv (kill-time
// power law, rate exponential, rate linear on the smaller half of the sizes),
// sweep_summary.txt with the attack-time/kill-time crossing estimate, and
// two gnuplot scripts.
int run_sweep(const std::string& scenario_path, std::vector<long> f_values, int replications,
              std::optional<std::uint64_t> seed, std::optional<std::string> out_dir, CommandIO io);

// Searches the documented behavior grid (spam gap x resale probability x
// spawn count) for a mix whose fitted long-run per-form rate lands within
// `tolerance` of `target`, verifying candidates by simulation; writes the
// winning scenario to <out_dir>/calibrated-scenario.json. Exits nonzero with
// the best candidate when nothing qualifies.
int run_calibrate(double target, double tolerance, const std::string& out_dir, CommandIO io);

// Replays a scenario's attack against its cleaner policy with its legitimate
// background traffic; writes defense.csv.
int run_defend(const std::string& scenario_path, std::optional<std::uint64_t> seed,
               std::optional<std::string> out_dir, CommandIO io);

// Runs the validation-protocol adversary suite; writes prevention_report.csv
// and the protocol trace of one honest exchange. Exit 3 on any false accept.
int run_prevent(long trials, std::uint64_t seed, std::optional<std::string> registry_path,
                const std::string& out_dir, CommandIO io);

// Full argv-style entry point (argv[0] excluded).
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

} // namespace formflood::cli
