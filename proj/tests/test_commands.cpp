#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "formflood/commands.hpp"
#include "formflood/sim.hpp"

using namespace formflood;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("formflood-cmd-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int n = 0;
        return n;
    }
    std::string str(const char* leaf = nullptr) const {
        return leaf ? (path / leaf).string() : path.string();
    }
};

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

double summary_value(const std::string& text, const std::string& key) {
    const auto pos = text.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::strtod(text.c_str() + pos + key.size() + 1, nullptr);
}

const std::string kData = FORMFLOOD_TEST_DATA_DIR;

} // namespace

TEST_CASE("harvest command scans the bundled corpus") {
    TempDir dir;
    const auto r = run({"harvest", "--corpus", kData + "/corpus", "--out", dir.str("pads.jsonl")});
    CHECK(r.code == 0);
    CHECK(r.out == "harvest_rate=0.400\n");
    const std::string jsonl = slurp(dir.str("pads.jsonl"));
    CHECK(!jsonl.empty());
    CHECK(jsonl.front() == '{');

    const auto again =
        run({"harvest", "--corpus", kData + "/corpus", "--out", dir.str("pads2.jsonl")});
    CHECK(again.code == 0);
    CHECK(slurp(dir.str("pads2.jsonl")) == jsonl);

    const auto missing =
        run({"harvest", "--corpus", dir.str("no-such-corpus"), "--out", dir.str("never.jsonl")});
    CHECK(missing.code == 2);
    CHECK(!missing.err.empty());
    CHECK(!fs::exists(dir.str("never.jsonl"))); // failure leaves no output behind
}

TEST_CASE("simulate command writes the run artifacts") {
    TempDir dir;
    const std::string scenario = kData + "/scenarios/flood-F3911.json";
    const auto r = run({"simulate", "--scenario", scenario, "--out-dir", dir.str("a")});
    CHECK(r.code == 0);
    for (const char* leaf : {"series.csv", "arrivals.csv", "summary.txt", "inbox.gp"})
        CHECK(fs::exists(dir.path / "a" / leaf));
    const std::string summary = slurp(dir.str() + "/a/summary.txt");
    CHECK(r.out == summary); // stdout echoes the summary file
    CHECK(summary_value(summary, "kill_time_minutes") <
          summary_value(summary, "attack_time_minutes"));
    CHECK(summary_value(summary, "forms") == 3911);

    const auto again = run({"simulate", "--scenario", scenario, "--out-dir", dir.str("b")});
    CHECK(again.code == 0);
    CHECK(slurp(dir.str() + "/b/series.csv") == slurp(dir.str() + "/a/series.csv"));
    CHECK(slurp(dir.str() + "/b/arrivals.csv") == slurp(dir.str() + "/a/arrivals.csv"));

    const auto smaller = run({"simulate", "--scenario", scenario, "--forms", "100", "--seed", "9",
                              "--out-dir", dir.str("c")});
    CHECK(smaller.code == 0);
    CHECK(summary_value(smaller.out, "forms") == 100);
    CHECK(smaller.out != r.out);

    const auto negative =
        run({"simulate", "--scenario", scenario, "--forms", "-5", "--out-dir", dir.str("d")});
    CHECK(negative.code == 1);

    std::ofstream(dir.str("broken.json")) << "{\"name\": \"x\", \"attack\": {}, \"quota\": 1}\n";
    const auto broken =
        run({"simulate", "--scenario", dir.str("broken.json"), "--out-dir", dir.str("e")});
    CHECK(broken.code == 1);
    CHECK(broken.err.find("unknown key 'quota'") != std::string::npos);

    const auto gone = run({"simulate", "--scenario", dir.str("gone.json")});
    CHECK(gone.code == 1);
}

TEST_CASE("fit command recovers known curve parameters") {
    // Bake a clean trajectory from known parameters, round-trip it through
    // the CSV exporter, and demand sub-0.1% recovery on the bytes channel.
    const double a = 50.0, b = 200.0, c = 0.2;
    TimeSeries series;
    for (int i = 1; i <= 200; ++i) {
        SeriesSample s;
        s.t = static_cast<double>(i);
        s.bytes = (a * s.t + b) * std::tanh(c * s.t);
        s.messages = std::lround(s.bytes);
        series.samples.push_back(s);
    }
    TempDir dir;
    std::ofstream(dir.str("series.csv")) << series_to_csv(series);

    const auto r = run({"fit", "--series", dir.str("series.csv"), "--channel", "bytes",
                        "--out-dir", dir.str("out")});
    CHECK(r.code == 0);
    double fa = 0, fb = 0, fc = 0;
    REQUIRE(std::sscanf(r.out.c_str(), "channel=bytes a=%lf b=%lf c=%lf", &fa, &fb, &fc) == 3);
    CHECK(std::abs(fa / a - 1.0) < 1e-3);
    CHECK(std::abs(fb / b - 1.0) < 1e-3);
    CHECK(std::abs(fc / c - 1.0) < 1e-3);
    CHECK(r.out.find("converged=true") != std::string::npos);
    const std::string report = slurp(dir.str() + "/out/fit.csv");
    CHECK(report.rfind("channel,a,b,c,residual,converged,iterations\n", 0) == 0);

    std::ofstream(dir.str("bad.csv")) << "t_minutes,messages,bytes\n1.0,oops,3\n";
    CHECK(run({"fit", "--series", dir.str("bad.csv"), "--out-dir", dir.str("out")}).code == 2);
    std::ofstream(dir.str("hdr.csv")) << "time,count\n";
    CHECK(run({"fit", "--series", dir.str("hdr.csv"), "--out-dir", dir.str("out")}).code == 2);
    CHECK(run({"fit", "--series", dir.str("series.csv"), "--channel", "volume", "--out-dir",
               dir.str("out")})
              .code == 1);
}

TEST_CASE("fit command consumes simulate output directly") {
    TempDir dir;
    REQUIRE(run({"simulate", "--scenario", kData + "/scenarios/default.json", "--forms", "256",
                 "--out-dir", dir.str("sim")})
                .code == 0);
    const auto r = run({"fit", "--series", dir.str() + "/sim/arrivals.csv", "--out-dir",
                        dir.str("fit")});
    CHECK(r.code == 0);
    CHECK(r.out.find("channel=messages") != std::string::npos);
    CHECK(r.out.find("converged=true") != std::string::npos);
}

TEST_CASE("sweep command emits tables, scaling fits, and plots") {
    TempDir dir;
    const std::string scenario = kData + "/scenarios/default.json";
    const auto r = run({"sweep", "--scenario", scenario, "--forms", "200,400", "--reps", "2",
                        "--out-dir", dir.str("a")});
    CHECK(r.code == 0);
    for (const char* leaf :
         {"sweep.csv", "scaling.csv", "sweep_summary.txt", "kill_vs_F.gp", "rate_vs_F.gp"})
        CHECK(fs::exists(dir.path / "a" / leaf));
    const std::string table = slurp(dir.str() + "/a/sweep.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 3); // header + one row per size
    CHECK(table.rfind("F,mean_kill_minutes,mean_rate_per_min,replications\n", 0) == 0);
    const std::string scaling = slurp(dir.str() + "/a/scaling.csv");
    CHECK(scaling.find("power_law") != std::string::npos);
    CHECK(scaling.find("exponential") != std::string::npos);
    CHECK(scaling.find("linear") != std::string::npos);
    CHECK(slurp(dir.str() + "/a/sweep_summary.txt").find("crossing_forms=") != std::string::npos);

    const auto again = run({"sweep", "--scenario", scenario, "--forms", "200,400", "--reps", "2",
                            "--out-dir", dir.str("b")});
    CHECK(again.code == 0);
    CHECK(slurp(dir.str() + "/b/sweep.csv") == table);
    CHECK(slurp(dir.str() + "/b/scaling.csv") == scaling);

    CHECK(run({"sweep", "--scenario", scenario, "--forms", "200", "--reps", "0", "--out-dir",
               dir.str("c")})
              .code == 1);
    CHECK(run({"sweep", "--scenario", scenario, "--out-dir", dir.str("d")}).code == 1);
}

TEST_CASE("calibrate command reproduces the shipped calibrated scenario") {
    TempDir dir;
    const auto r = run({"calibrate", "--out-dir", dir.str()});
    CHECK(r.code == 0);
    CHECK(r.out.find("calibrated ") != std::string::npos);
    // The search must land on the shipped scenario, byte for byte; anything
    // else means the preset and the calibration grid have drifted apart.
    CHECK(slurp(dir.str("calibrated-scenario.json")) ==
          slurp(kData + "/scenarios/calibrated-default.json"));

    CHECK(run({"calibrate", "--target", "-1", "--out-dir", dir.str()}).code == 1);
    CHECK(run({"calibrate", "--target", "9.0", "--tolerance", "0.01", "--out-dir", dir.str()})
              .code == 2); // far outside what the grid can reach
}

TEST_CASE("defend command scores the cleaner against a scenario") {
    TempDir dir;
    const auto r = run({"defend", "--scenario", kData + "/scenarios/individual.json", "--out-dir",
                        dir.str("a")});
    CHECK(r.code == 0);
    const std::string csv = slurp(dir.str() + "/a/defense.csv");
    CHECK(csv.rfind("persona,attack_recall,legit_retention,bytes_freed,threshold\n", 0) == 0);
    CHECK(csv.find("individual,1.0000,1.0000,") != std::string::npos);

    CHECK(run({"defend", "--scenario", kData + "/scenarios/store.json", "--out-dir",
               dir.str("b")})
              .code == 0);
    CHECK(run({"defend", "--scenario", kData + "/scenarios/politician.json", "--out-dir",
               dir.str("c")})
              .code == 0);
    CHECK(slurp(dir.str() + "/b/defense.csv").rfind("persona,", 0) == 0);

    // A scenario without a defense half is a usage error, not a crash.
    const auto bare = run({"defend", "--scenario", kData + "/scenarios/default.json", "--out-dir",
                           dir.str("d")});
    CHECK(bare.code == 1);
    CHECK(bare.err.find("defense") != std::string::npos);
}

TEST_CASE("prevent command runs the adversary suite") {
    TempDir dir;
    const auto r = run({"prevent", "--trials", "200", "--seed", "7", "--out-dir", dir.str()});
    CHECK(r.code == 0);
    CHECK(r.out.find("false_accepts=0\n") != std::string::npos);
    CHECK(r.out.find("false_rejects=0\n") != std::string::npos);
    const std::string report = slurp(dir.str("prevention_report.csv"));
    CHECK(report.rfind("adversary,verdict,count\n", 0) == 0);
    CHECK(report.find("honest,accepted,200") != std::string::npos);
    // The worked example: one challenge issued, then accepted.
    CHECK(slurp(dir.str("trace.tsv")) ==
          "0.000\tissue\tc-0\tpending\n1.000\tverify\tc-0\taccepted\n");

    const auto rerun =
        run({"prevent", "--trials", "200", "--seed", "7", "--out-dir", dir.str("again")});
    CHECK(slurp(dir.str() + "/again/prevention_report.csv") == report);

    CHECK(run({"prevent", "--trials", "0", "--out-dir", dir.str()}).code == 1);
    CHECK(run({"prevent", "--registry", dir.str("missing.json"), "--out-dir", dir.str()}).code ==
          1);
}

TEST_CASE("command line parses help and rejects junk") {
    CHECK(run({"--help"}).code == 0);
    const auto help = run({"--help"});
    for (const char* name :
         {"harvest", "simulate", "fit", "sweep", "calibrate", "defend", "prevent"})
        CHECK(help.out.find(name) != std::string::npos);
    CHECK(run({"simulate", "--help"}).code == 0);

    CHECK(run({}).code == 1);
    CHECK(run({"bogus"}).code == 1);
    CHECK(run({"simulate"}).code == 1);           // missing required --scenario
    CHECK(run({"harvest", "--corpus", "x"}).code == 1); // missing required --out
}

TEST_CASE("cli binary runs as a subprocess") {
    FILE* pipe = ::popen(FORMFLOOD_CLI_PATH " --help 2>&1", "r");
    REQUIRE(pipe != nullptr);
    std::string output;
    char chunk[256];
    while (std::fgets(chunk, sizeof chunk, pipe)) output += chunk;
    const int status = ::pclose(pipe);
    CHECK(status == 0);
    CHECK(output.find("simulate") != std::string::npos);
}

TEST_CASE("commands never open a socket") {
    TempDir dir;
    REQUIRE(run({"harvest", "--corpus", kData + "/corpus", "--out", dir.str("pads.jsonl")}).code ==
            0);
    REQUIRE(run({"simulate", "--scenario", kData + "/scenarios/default.json", "--forms", "64",
                 "--out-dir", dir.str("sim")})
                .code == 0);
    REQUIRE(run({"prevent", "--trials", "50", "--out-dir", dir.str("prev")}).code == 0);

    const fs::path fds("/proc/self/fd");
    if (!fs::exists(fds)) return; // introspection unavailable; nothing to check
    int sockets = 0;
    for (const auto& entry : fs::directory_iterator(fds)) {
        std::error_code ec;
        const fs::path target = fs::read_symlink(entry.path(), ec);
        if (!ec && target.string().rfind("socket:", 0) == 0) ++sockets;
    }
    CHECK(sockets == 0);
}
