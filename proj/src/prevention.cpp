#include "formflood/prevention.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace formflood {

namespace {

std::string format_trace_line(const TraceEvent& e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", e.t);
    std::string line = buf;
    line += '\t';
    line += e.kind;
    line += '\t';
    line += e.challenge_id;
    line += '\t';
    line += e.verdict;
    line += '\n';
    return line;
}

} // namespace

std::string nonce_hex(const Nonce& n) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(n.hi),
                  static_cast<unsigned long long>(n.lo));
    return buf;
}

std::string_view verdict_name(Verdict v) {
    switch (v) {
    case Verdict::Accepted: return "accepted";
    case Verdict::RejectedRelay: return "rejected_relay";
    case Verdict::RejectedOriginMismatch: return "rejected_origin_mismatch";
    case Verdict::RejectedBadNonce: return "rejected_bad_nonce";
    case Verdict::RejectedExpired: return "rejected_expired";
    case Verdict::RejectedUnknownChallenge: return "rejected_unknown_challenge";
    }
    return "unknown_verdict";
}

ChallengeAuthority::ChallengeAuthority(std::uint64_t seed)
    : rng_(mix_seed(seed, 0x6e6f6e6365ULL /*"nonce"*/)) {}

ValidationChallenge ChallengeAuthority::issue_challenge(const SubmissionRequest& form_submission,
                                                        std::string_view claimed_address,
                                                        double now, double ttl_minutes) {
    std::string address(claimed_address);
    if (!valid_address(address))
        throw std::invalid_argument("issue_challenge: malformed address '" + address + "'");
    if (!(ttl_minutes > 0.0))
        throw std::invalid_argument("issue_challenge: ttl must be positive");

    std::lock_guard<std::mutex> lock(mutex_);
    ValidationChallenge ch;
    ch.challenge_id = "c-" + std::to_string(next_id_++);
    ch.claimed_address = std::move(address);
    ch.nonce = Nonce{rng_(), rng_()};
    ch.issued_at = now;
    ch.expires_at = now + ttl_minutes;
    ch.form_payload = form_submission;
    pending_.emplace(ch.nonce, ch);
    trace_.push_back({now, "issue", ch.challenge_id, "pending"});
    return ch;
}

ValidationOutcome ChallengeAuthority::verify(const ValidationEmail& email,
                                             const DomainRegistry& registry, double now) {
    std::lock_guard<std::mutex> lock(mutex_);
    ValidationOutcome out{Verdict::RejectedUnknownChallenge, "-"};
    // Relay first: a laundered origin voids the whole proof, nonce or not.
    if (email.via_open_relay || registry.open_relays.count(email.originating_server) > 0) {
        out.verdict = Verdict::RejectedRelay;
    } else if (!email.nonce_presented.has_value()) {
        out.verdict = Verdict::RejectedBadNonce;
    } else {
        auto it = pending_.find(*email.nonce_presented);
        if (it == pending_.end()) {
            out.verdict = Verdict::RejectedUnknownChallenge;
        } else {
            const ValidationChallenge& ch = it->second;
            out.challenge_id = ch.challenge_id;
            auto server = registry.authorized_server.find(domain_of(email.claimed_sender));
            if (now >= ch.expires_at) {
                out.verdict = Verdict::RejectedExpired;
            } else if (email.claimed_sender != ch.claimed_address ||
                       server == registry.authorized_server.end() ||
                       server->second != email.originating_server) {
                out.verdict = Verdict::RejectedOriginMismatch;
            } else {
                out.verdict = Verdict::Accepted;
                pending_.erase(it); // single use: replays can no longer match
            }
        }
    }
    trace_.push_back({now, "verify", out.challenge_id, std::string(verdict_name(out.verdict))});
    return out;
}

std::size_t ChallengeAuthority::prune_expired(double now) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t dropped = 0;
    for (auto it = pending_.begin(); it != pending_.end();) {
        if (now >= it->second.expires_at) {
            it = pending_.erase(it);
            ++dropped;
        } else {
            ++it;
        }
    }
    return dropped;
}

std::size_t ChallengeAuthority::pending_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return pending_.size();
}

std::vector<TraceEvent> ChallengeAuthority::trace() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return trace_;
}

std::string trace_to_text(const std::vector<TraceEvent>& events) {
    std::string text;
    for (const TraceEvent& e : events) text += format_trace_line(e);
    return text;
}

ValidationEmail craft_email(const DomainRegistry& registry, const std::string& account_address,
                            const std::string& claimed_sender, std::optional<Nonce> nonce,
                            double received_at, bool via_open_relay,
                            const std::string& relay_server) {
    ValidationEmail email;
    email.claimed_sender = claimed_sender;
    email.via_open_relay = via_open_relay;
    if (via_open_relay) {
        email.originating_server = relay_server;
    } else {
        auto it = registry.authorized_server.find(domain_of(account_address));
        email.originating_server = it == registry.authorized_server.end() ? "" : it->second;
    }
    email.nonce_presented = nonce;
    email.received_at = received_at;
    return email;
}

AdversaryReport run_adversary_suite(const DomainRegistry& registry, long trials,
                                    std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("run_adversary_suite: trials must be >= 1");

    DomainRegistry reg = registry;
    reg.authorized_server.emplace("home-isp.example", "smtp.home-isp.example");
    reg.authorized_server.emplace("spoof-isp.example", "smtp.spoof-isp.example");
    reg.open_relays.insert("relay.open.example");

    const std::string victim = "victim@home-isp.example";
    SubmissionRequest form;
    form.action = "https://launch-pad.example/subscribe";
    form.method = "post";
    form.payload = {{"email", victim}};
    form.source_page = "adversary-suite";

    AdversaryReport report;
    report.trials_per_adversary = trials;

    enum Role { Honest, Spoofer, Guesser, RelayUser, Insider, kRoleCount };
    static const char* kRoleNames[kRoleCount] = {"honest", "spoofer", "guesser", "relay_user",
                                                 "insider"};

    for (int role = 0; role < kRoleCount; ++role) {
        ChallengeAuthority site(mix_seed(seed, 0x726f6c65ULL /*"role"*/, role));
        Rng adversary_rng(mix_seed(seed, 0x616476ULL /*"adv"*/, role));
        auto& counts = report.verdict_counts[kRoleNames[role]];
        for (long i = 0; i < trials; ++i) {
            const double t = 0.01 * static_cast<double>(i);
            ValidationChallenge ch = site.issue_challenge(form, victim, t);
            ValidationEmail email;
            switch (role) {
            case Honest:
                email = craft_email(reg, victim, victim, ch.nonce, t + 0.005);
                break;
            case Spoofer: // right nonce, wrong origin: mails from a foreign server
                email = craft_email(reg, "mallory@spoof-isp.example", victim, ch.nonce, t + 0.005);
                break;
            case Guesser: // right origin, but must hit a 128-bit nonce blind
                email = craft_email(reg, "lodger@home-isp.example", victim,
                                    Nonce{adversary_rng(), adversary_rng()}, t + 0.005);
                break;
            case RelayUser: // right nonce, origin laundered through an open relay
                email = craft_email(reg, "mallory@spoof-isp.example", victim, ch.nonce, t + 0.005,
                                    true, "relay.open.example");
                break;
            case Insider: // controls the victim domain's server and holds the nonce
                email = craft_email(reg, "lodger@home-isp.example", victim, ch.nonce, t + 0.005);
                break;
            }
            ValidationOutcome out = site.verify(email, reg, t + 0.005);
            ++counts[std::string(verdict_name(out.verdict))];
            if (out.verdict == Verdict::Accepted) {
                if (role == Insider)
                    ++report.insider_accepts;
                else if (role != Honest)
                    ++report.false_accepts;
            } else if (role == Honest) {
                ++report.false_rejects;
            }
        }
    }
    report.insider_risk_flagged = report.insider_accepts > 0;
    return report;
}

std::string adversary_report_csv(const AdversaryReport& report) {
    std::string csv = "adversary,verdict,count\n";
    for (const auto& [adversary, verdicts] : report.verdict_counts) {
        for (const auto& [verdict, count] : verdicts) {
            csv += adversary;
            csv += ',';
            csv += verdict;
            csv += ',';
            csv += std::to_string(count);
            csv += '\n';
        }
    }
    return csv;
}

void seed_address_book(const ValidationOutcome& outcome, const std::string& site_address,
                       ExtendedAddressBook& book, double now) {
    if (outcome.verdict != Verdict::Accepted)
        throw std::invalid_argument("seed_address_book: outcome '" +
                                    std::string(verdict_name(outcome.verdict)) +
                                    "' was not accepted");
    book.record_contact(site_address, now);
}

DomainRegistry load_registry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("registry: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("registry: " + path + ": " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("registry: " + path + ": top level must be an object");
    DomainRegistry reg;
    for (const auto& [key, value] : j.items()) {
        if (key == "domains") {
            if (!value.is_object())
                throw std::runtime_error("registry: " + path + ": 'domains' must be an object");
            for (const auto& [domain, server] : value.items()) {
                if (!server.is_string())
                    throw std::runtime_error("registry: " + path + ": domains." + domain +
                                             " must be a string");
                reg.authorized_server[domain] = server.get<std::string>();
            }
        } else if (key == "open_relays") {
            if (!value.is_array())
                throw std::runtime_error("registry: " + path + ": 'open_relays' must be an array");
            for (const auto& relay : value) {
                if (!relay.is_string())
                    throw std::runtime_error("registry: " + path +
                                             ": open_relays entries must be strings");
                reg.open_relays.insert(relay.get<std::string>());
            }
        } else {
            throw std::runtime_error("registry: " + path + ": unknown key '" + key + "'");
        }
    }
    return reg;
}

std::string registry_to_json(const DomainRegistry& registry) {
    nlohmann::ordered_json j;
    j["domains"] = nlohmann::ordered_json::object();
    for (const auto& [domain, server] : registry.authorized_server) j["domains"][domain] = server;
    j["open_relays"] = nlohmann::ordered_json::array();
    for (const std::string& relay : registry.open_relays) j["open_relays"].push_back(relay);
    return j.dump(2) + "\n";
}

void save_registry(const DomainRegistry& registry, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("registry: cannot write '" + path + "'");
    out << registry_to_json(registry);
}

} // namespace formflood
