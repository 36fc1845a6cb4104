#include "formflood/scenario.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace formflood {

namespace {

using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;

// --- strict reading helpers --------------------------------------------------

struct Reader {
    const std::string& origin;

    [[noreturn]] void fail(const std::string& path, const std::string& what) const {
        std::string msg = origin;
        msg += ": ";
        if (!path.empty()) {
            msg += path;
            msg += ": ";
        }
        msg += what;
        throw ScenarioError(msg);
    }

    void check_keys(const Json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) const {
        for (const auto& [key, _] : obj.items()) {
            bool known = false;
            for (const char* a : allowed)
                if (key == a) {
                    known = true;
                    break;
                }
            if (!known) fail(path, "unknown key '" + key + "'");
        }
    }

    const Json* find(const Json& obj, const char* key) const {
        auto it = obj.find(key);
        return it == obj.end() || it->is_null() ? nullptr : &*it;
    }

    const Json& require(const Json& obj, const char* key, const std::string& path) const {
        const Json* j = find(obj, key);
        if (!j) fail(path, "missing required key '" + std::string(key) + "'");
        return *j;
    }

    void require_object(const Json& j, const std::string& path) const {
        if (!j.is_object()) fail(path, "must be an object");
    }

    double as_number(const Json& j, const std::string& path) const {
        if (!j.is_number()) fail(path, "must be a number");
        return j.get<double>();
    }

    long as_integer(const Json& j, const std::string& path) const {
        if (!j.is_number_integer() && !j.is_number_unsigned()) fail(path, "must be an integer");
        return j.get<long>();
    }

    std::uint64_t as_seed(const Json& j, const std::string& path) const {
        if (j.is_number_unsigned()) return j.get<std::uint64_t>();
        if (j.is_number_integer() && j.get<long long>() >= 0)
            return static_cast<std::uint64_t>(j.get<long long>());
        fail(path, "must be a non-negative integer");
    }

    bool as_bool(const Json& j, const std::string& path) const {
        if (!j.is_boolean()) fail(path, "must be a boolean");
        return j.get<bool>();
    }

    std::string as_string(const Json& j, const std::string& path) const {
        if (!j.is_string()) fail(path, "must be a string");
        return j.get<std::string>();
    }

    std::vector<std::string> as_string_array(const Json& j, const std::string& path) const {
        if (!j.is_array()) fail(path, "must be an array of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(as_string(j[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

    double number_or(const Json& obj, const char* key, const std::string& path,
                     double fallback) const {
        const Json* j = find(obj, key);
        return j ? as_number(*j, path + "." + key) : fallback;
    }

    long integer_or(const Json& obj, const char* key, const std::string& path,
                    long fallback) const {
        const Json* j = find(obj, key);
        return j ? as_integer(*j, path + "." + key) : fallback;
    }

    bool bool_or(const Json& obj, const char* key, const std::string& path, bool fallback) const {
        const Json* j = find(obj, key);
        return j ? as_bool(*j, path + "." + key) : fallback;
    }

    std::string string_or(const Json& obj, const char* key, const std::string& path,
                          std::string fallback) const {
        const Json* j = find(obj, key);
        return j ? as_string(*j, path + "." + key) : std::move(fallback);
    }

    // --- domain pieces --------------------------------------------------------

    Dist read_dist(const Json& j, const std::string& path) const {
        require_object(j, path);
        const std::string kind = as_string(require(j, "kind", path), path + ".kind");
        Dist d;
        if (kind == "constant") {
            check_keys(j, path, {"kind", "value", "min", "max"});
            d = Dist::constant(as_number(require(j, "value", path), path + ".value"));
        } else if (kind == "uniform") {
            check_keys(j, path, {"kind", "lo", "hi", "min", "max"});
            d = Dist::uniform(as_number(require(j, "lo", path), path + ".lo"),
                              as_number(require(j, "hi", path), path + ".hi"));
        } else if (kind == "exponential") {
            check_keys(j, path, {"kind", "mean", "min", "max"});
            d = Dist::exponential(as_number(require(j, "mean", path), path + ".mean"));
        } else if (kind == "lognormal") {
            check_keys(j, path, {"kind", "median", "sigma", "min", "max"});
            d = Dist::lognormal(as_number(require(j, "median", path), path + ".median"),
                                as_number(require(j, "sigma", path), path + ".sigma"));
        } else {
            fail(path + ".kind",
                 "unknown kind '" + kind + "' (expected constant/uniform/exponential/lognormal)");
        }
        if (const Json* lo = find(j, "min")) d.clamp_min = as_number(*lo, path + ".min");
        if (const Json* hi = find(j, "max")) d.clamp_max = as_number(*hi, path + ".max");
        return d;
    }

    Dist dist_or(const Json& obj, const char* key, const std::string& path, Dist fallback) const {
        const Json* j = find(obj, key);
        return j ? read_dist(*j, path + "." + key) : std::move(fallback);
    }

    SiteBehavior read_behavior(const Json& j, const std::string& path) const {
        require_object(j, path);
        check_keys(j, path,
                   {"name", "immediate_prob", "immediate_delay", "message_size",
                    "periodic_interval", "ack_retries", "ack_interval", "resale_prob",
                    "resale_delay", "resale_spawn_count", "spam_interval", "spam_size"});
        SiteBehavior b;
        b.name = as_string(require(j, "name", path), path + ".name");
        b.immediate_prob = number_or(j, "immediate_prob", path, b.immediate_prob);
        b.immediate_delay = dist_or(j, "immediate_delay", path, b.immediate_delay);
        b.message_size = dist_or(j, "message_size", path, b.message_size);
        if (const Json* p = find(j, "periodic_interval"))
            b.periodic_interval = as_number(*p, path + ".periodic_interval");
        b.ack_retries = static_cast<int>(integer_or(j, "ack_retries", path, b.ack_retries));
        b.ack_interval = number_or(j, "ack_interval", path, b.ack_interval);
        b.resale_prob = number_or(j, "resale_prob", path, b.resale_prob);
        b.resale_delay = dist_or(j, "resale_delay", path, b.resale_delay);
        b.resale_spawn_count =
            static_cast<int>(integer_or(j, "resale_spawn_count", path, b.resale_spawn_count));
        b.spam_interval = dist_or(j, "spam_interval", path, b.spam_interval);
        b.spam_size = dist_or(j, "spam_size", path, b.spam_size);
        return b;
    }

    std::vector<BehaviorMixEntry> read_mix(const Json& j, const std::string& path) const {
        if (j.is_string()) {
            const std::string name = j.get<std::string>();
            auto mix = named_mix(name);
            if (!mix) fail(path, "unknown mix name '" + name + "' (expected default/calibrated)");
            return *mix;
        }
        if (!j.is_array()) fail(path, "must be a mix name or an array of entries");
        if (j.empty()) fail(path, "mix must not be empty");
        std::vector<BehaviorMixEntry> mix;
        for (std::size_t i = 0; i < j.size(); ++i) {
            const std::string epath = path + "[" + std::to_string(i) + "]";
            require_object(j[i], epath);
            check_keys(j[i], epath, {"weight", "behavior"});
            BehaviorMixEntry entry;
            entry.weight = as_number(require(j[i], "weight", epath), epath + ".weight");
            entry.behavior = read_behavior(require(j[i], "behavior", epath), epath + ".behavior");
            mix.push_back(std::move(entry));
        }
        return mix;
    }

    AttackConfig read_attack(const Json& j, const std::string& path) const {
        require_object(j, path);
        check_keys(j, path,
                   {"num_forms", "fill_rate", "quota", "sms_mode", "horizon_minutes", "seed",
                    "mix"});
        AttackConfig cfg;
        cfg.num_forms = as_integer(require(j, "num_forms", path), path + ".num_forms");
        cfg.fill_rate = number_or(j, "fill_rate", path, cfg.fill_rate);
        cfg.quota = number_or(j, "quota", path, cfg.quota);
        cfg.sms_mode = bool_or(j, "sms_mode", path, cfg.sms_mode);
        cfg.horizon_minutes = number_or(j, "horizon_minutes", path, cfg.horizon_minutes);
        if (const Json* s = find(j, "seed")) cfg.seed = as_seed(*s, path + ".seed");
        cfg.mix = read_mix(require(j, "mix", path), path + ".mix");
        return cfg;
    }

    CleanerPolicy read_policy(const Json& j, const std::string& path) const {
        require_object(j, path);
        check_keys(j, path,
                   {"persona", "min_suspect_size", "domain_allow", "domain_deny",
                    "collector_rules", "constituent_domains", "home_country", "notify_sender"});
        CleanerPolicy policy;
        const std::string persona = as_string(require(j, "persona", path), path + ".persona");
        auto parsed = persona_from_name(persona);
        if (!parsed)
            fail(path + ".persona",
                 "unknown persona '" + persona + "' (expected individual/store/politician)");
        policy.persona = *parsed;
        if (const Json* m = find(j, "min_suspect_size"))
            policy.min_suspect_size = as_number(*m, path + ".min_suspect_size");
        if (const Json* a = find(j, "domain_allow"))
            policy.domain_allow = as_string_array(*a, path + ".domain_allow");
        if (const Json* d = find(j, "domain_deny"))
            policy.domain_deny = as_string_array(*d, path + ".domain_deny");
        if (const Json* rules = find(j, "collector_rules")) {
            require_object(*rules, path + ".collector_rules");
            for (const auto& [domain, rule] : rules->items()) {
                const std::string rpath = path + ".collector_rules." + domain;
                require_object(rule, rpath);
                check_keys(rule, rpath,
                           {"volume_per_hour", "min_account_age_minutes", "min_reputation",
                            "pseudonyms"});
                CollectorRule r;
                r.volume_per_hour = number_or(rule, "volume_per_hour", rpath, r.volume_per_hour);
                r.min_account_age_minutes =
                    number_or(rule, "min_account_age_minutes", rpath, r.min_account_age_minutes);
                r.min_reputation = number_or(rule, "min_reputation", rpath, r.min_reputation);
                if (const Json* ps = find(rule, "pseudonyms")) {
                    require_object(*ps, rpath + ".pseudonyms");
                    for (const auto& [who, rec] : ps->items()) {
                        const std::string ppath = rpath + ".pseudonyms." + who;
                        require_object(rec, ppath);
                        check_keys(rec, ppath, {"established_at", "reputation"});
                        PseudonymRecord p;
                        p.established_at = number_or(rec, "established_at", ppath, 0.0);
                        p.reputation = number_or(rec, "reputation", ppath, 0.0);
                        r.pseudonyms[who] = p;
                    }
                }
                policy.collector_rules[domain] = std::move(r);
            }
        }
        if (const Json* c = find(j, "constituent_domains"))
            policy.constituent_domains = as_string_array(*c, path + ".constituent_domains");
        policy.home_country = string_or(j, "home_country", path, policy.home_country);
        policy.notify_sender = bool_or(j, "notify_sender", path, policy.notify_sender);
        return policy;
    }

    LegitTrafficSpec read_legit(const Json& j, const std::string& path) const {
        require_object(j, path);
        check_keys(j, path, {"rate_per_min", "senders"});
        LegitTrafficSpec spec;
        spec.rate_per_min = number_or(j, "rate_per_min", path, spec.rate_per_min);
        spec.senders = as_string_array(require(j, "senders", path), path + ".senders");
        if (spec.senders.empty()) fail(path + ".senders", "must not be empty");
        return spec;
    }

    EvaluationOptions read_evaluation(const Json& j, const std::string& path) const {
        require_object(j, path);
        check_keys(j, path, {"baseline_rate", "trigger_threshold", "window_minutes", "weights"});
        EvaluationOptions opts;
        opts.baseline_rate = number_or(j, "baseline_rate", path, opts.baseline_rate);
        opts.trigger_threshold = number_or(j, "trigger_threshold", path, opts.trigger_threshold);
        opts.window_minutes = number_or(j, "window_minutes", path, opts.window_minutes);
        if (const Json* w = find(j, "weights")) {
            const std::string wpath = path + ".weights";
            require_object(*w, wpath);
            check_keys(*w, wpath, {"rate_w", "unknown_w", "duplicate_w", "offset"});
            opts.weights.rate_w = number_or(*w, "rate_w", wpath, opts.weights.rate_w);
            opts.weights.unknown_w = number_or(*w, "unknown_w", wpath, opts.weights.unknown_w);
            opts.weights.duplicate_w =
                number_or(*w, "duplicate_w", wpath, opts.weights.duplicate_w);
            opts.weights.offset = number_or(*w, "offset", wpath, opts.weights.offset);
        }
        return opts;
    }
};

// --- writing -----------------------------------------------------------------

OJson dist_json(const Dist& d) {
    OJson j;
    j["kind"] = dist_kind_name(d.kind);
    switch (d.kind) {
    case DistKind::Constant: j["value"] = d.p1; break;
    case DistKind::Uniform:
        j["lo"] = d.p1;
        j["hi"] = d.p2;
        break;
    case DistKind::Exponential: j["mean"] = d.p1; break;
    case DistKind::Lognormal:
        j["median"] = d.p1;
        j["sigma"] = d.p2;
        break;
    }
    if (d.clamp_min) j["min"] = *d.clamp_min;
    if (d.clamp_max) j["max"] = *d.clamp_max;
    return j;
}

OJson behavior_json(const SiteBehavior& b) {
    OJson j;
    j["name"] = b.name;
    j["immediate_prob"] = b.immediate_prob;
    j["immediate_delay"] = dist_json(b.immediate_delay);
    j["message_size"] = dist_json(b.message_size);
    if (b.periodic_interval) j["periodic_interval"] = *b.periodic_interval;
    j["ack_retries"] = b.ack_retries;
    j["ack_interval"] = b.ack_interval;
    j["resale_prob"] = b.resale_prob;
    j["resale_delay"] = dist_json(b.resale_delay);
    j["resale_spawn_count"] = b.resale_spawn_count;
    j["spam_interval"] = dist_json(b.spam_interval);
    j["spam_size"] = dist_json(b.spam_size);
    return j;
}

OJson attack_json(const AttackConfig& cfg) {
    OJson j;
    j["num_forms"] = cfg.num_forms;
    j["fill_rate"] = cfg.fill_rate;
    j["quota"] = cfg.quota;
    j["sms_mode"] = cfg.sms_mode;
    j["horizon_minutes"] = cfg.horizon_minutes;
    j["seed"] = cfg.seed;
    j["mix"] = OJson::array();
    for (const auto& entry : cfg.mix) {
        OJson e;
        e["weight"] = entry.weight;
        e["behavior"] = behavior_json(entry.behavior);
        j["mix"].push_back(std::move(e));
    }
    return j;
}

OJson policy_json(const CleanerPolicy& policy) {
    OJson j;
    j["persona"] = std::string(persona_name(policy.persona));
    if (policy.min_suspect_size) j["min_suspect_size"] = *policy.min_suspect_size;
    j["domain_allow"] = policy.domain_allow;
    j["domain_deny"] = policy.domain_deny;
    j["collector_rules"] = OJson::object();
    for (const auto& [domain, rule] : policy.collector_rules) {
        OJson r;
        r["volume_per_hour"] = rule.volume_per_hour;
        r["min_account_age_minutes"] = rule.min_account_age_minutes;
        r["min_reputation"] = rule.min_reputation;
        r["pseudonyms"] = OJson::object();
        for (const auto& [who, rec] : rule.pseudonyms) {
            OJson p;
            p["established_at"] = rec.established_at;
            p["reputation"] = rec.reputation;
            r["pseudonyms"][who] = std::move(p);
        }
        j["collector_rules"][domain] = std::move(r);
    }
    j["constituent_domains"] = policy.constituent_domains;
    j["home_country"] = policy.home_country;
    j["notify_sender"] = policy.notify_sender;
    return j;
}

} // namespace

std::optional<std::vector<BehaviorMixEntry>> named_mix(const std::string& name) {
    if (name == "default") return default_mix();
    if (name == "calibrated") return calibrated_mix();
    return std::nullopt;
}

Scenario scenario_from_json(const std::string& text, const std::string& origin) {
    Reader r{origin};
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        r.fail("", e.what());
    }
    r.require_object(j, "");
    r.check_keys(j, "",
                 {"name", "attack", "defense", "legit_traffic", "evaluation",
                  "prevention_enabled", "outputs"});

    Scenario sc;
    sc.name = r.as_string(r.require(j, "name", ""), "name");
    if (sc.name.empty()) r.fail("name", "must not be empty");
    sc.attack = r.read_attack(r.require(j, "attack", ""), "attack");
    if (const Json* d = r.find(j, "defense")) sc.defense_policy = r.read_policy(*d, "defense");
    if (const Json* l = r.find(j, "legit_traffic"))
        sc.legit_traffic = r.read_legit(*l, "legit_traffic");
    if (const Json* e = r.find(j, "evaluation")) sc.evaluation = r.read_evaluation(*e, "evaluation");
    sc.prevention_enabled = r.bool_or(j, "prevention_enabled", "", sc.prevention_enabled);
    sc.outputs = r.string_or(j, "outputs", "", sc.outputs);
    if (sc.outputs.empty()) r.fail("outputs", "must not be empty");
    return sc;
}

std::string scenario_to_json(const Scenario& scenario) {
    OJson j;
    j["name"] = scenario.name;
    j["attack"] = attack_json(scenario.attack);
    if (scenario.defense_policy) j["defense"] = policy_json(*scenario.defense_policy);
    if (scenario.legit_traffic) {
        OJson l;
        l["rate_per_min"] = scenario.legit_traffic->rate_per_min;
        l["senders"] = scenario.legit_traffic->senders;
        j["legit_traffic"] = std::move(l);
    }
    {
        OJson e;
        e["baseline_rate"] = scenario.evaluation.baseline_rate;
        e["trigger_threshold"] = scenario.evaluation.trigger_threshold;
        e["window_minutes"] = scenario.evaluation.window_minutes;
        OJson w;
        w["rate_w"] = scenario.evaluation.weights.rate_w;
        w["unknown_w"] = scenario.evaluation.weights.unknown_w;
        w["duplicate_w"] = scenario.evaluation.weights.duplicate_w;
        w["offset"] = scenario.evaluation.weights.offset;
        e["weights"] = std::move(w);
        j["evaluation"] = std::move(e);
    }
    j["prevention_enabled"] = scenario.prevention_enabled;
    j["outputs"] = scenario.outputs;
    return j.dump(2) + "\n";
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError(path + ": cannot open scenario file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return scenario_from_json(buf.str(), path);
}

void save_scenario(const Scenario& scenario, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ScenarioError(path + ": cannot write scenario file");
    out << scenario_to_json(scenario);
}

} // namespace formflood
