#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "formflood/defense.hpp"
#include "formflood/sim.hpp"

namespace formflood {

// Background traffic that rides alongside the attack in defense runs.
struct LegitTrafficSpec {
    double rate_per_min = 0.5;
    std::vector<std::string> senders;
};

// One named, file-loadable experiment: an attack setup plus (optionally) the
// victim-side policy and traffic needed to exercise the cleaner against it.
struct Scenario {
    std::string name;
    AttackConfig attack;
    std::optional<CleanerPolicy> defense_policy;
    std::optional<LegitTrafficSpec> legit_traffic;
    EvaluationOptions evaluation{};
    bool prevention_enabled = false;
    std::string outputs = "out";
};

// Structural problems in scenario JSON; the message names the exact path
// (e.g. "attack.mix[2].behavior.spam_interval: unknown key 'sigma'").
class ScenarioError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Mixes addressable by name in scenario files ("default", "calibrated").
std::optional<std::vector<BehaviorMixEntry>> named_mix(const std::string& name);

// Parsing is strict: unknown keys, wrong types, and out-of-place shapes are
// rejected with the offending path. `origin` prefixes error messages (a file
// name, usually). The "mix" field takes either an inline entry array or the
// name of a bundled mix.
Scenario scenario_from_json(const std::string& text, const std::string& origin);

// Serialization always writes every field explicitly (named mixes come back
// inline), with deterministic layout: load -> save -> load is the identity
// and identical scenarios serialize identically.
std::string scenario_to_json(const Scenario& scenario);

Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path);

} // namespace formflood
