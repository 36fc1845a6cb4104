#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "formflood/defense.hpp"
#include "formflood/forms.hpp"

namespace formflood {

// 128-bit random challenge token.
struct Nonce {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;
    friend bool operator<(const Nonce& a, const Nonce& b) {
        return a.hi != b.hi ? a.hi < b.hi : a.lo < b.lo;
    }
    friend bool operator==(const Nonce& a, const Nonce& b) {
        return a.hi == b.hi && a.lo == b.lo;
    }
};

std::string nonce_hex(const Nonce& n); // 32 lowercase hex digits

// A pending mailto-validation challenge. The site never mails the claimed
// address; it waits for a message that proves control of it.
struct ValidationChallenge {
    std::string challenge_id; // unique per authority instance
    std::string claimed_address;
    Nonce nonce;
    double issued_at = 0.0;  // minutes
    double expires_at = 0.0; // issued_at + ttl; valid while now < expires_at
    SubmissionRequest form_payload; // the submission that triggered the challenge
};

// What the site can see of an arriving validation email. The claimed sender
// is attacker-controllable; the originating server is pinned to the mail
// domain the message was really sent from (unless it came through an open
// relay, which hides the origin) — craft_email enforces that.
struct ValidationEmail {
    std::string claimed_sender;
    std::string originating_server;
    bool via_open_relay = false;
    std::optional<Nonce> nonce_presented;
    double received_at = 0.0;
};

// One authorized outbound server identity per mail domain, plus the set of
// known open relays. Server identities are opaque tokens.
struct DomainRegistry {
    std::map<std::string, std::string> authorized_server;
    std::set<std::string> open_relays;
};

// Registry file: {"domains": {domain: server, ...}, "open_relays": [server, ...]}
// load rejects unknown keys and malformed shapes with std::runtime_error.
DomainRegistry load_registry(const std::string& path);
std::string registry_to_json(const DomainRegistry& registry);
void save_registry(const DomainRegistry& registry, const std::string& path);

enum class Verdict {
    Accepted,
    RejectedRelay,
    RejectedOriginMismatch,
    RejectedBadNonce,
    RejectedExpired,
    RejectedUnknownChallenge,
};

std::string_view verdict_name(Verdict v);

struct ValidationOutcome {
    Verdict verdict = Verdict::RejectedUnknownChallenge;
    std::string challenge_id; // "-" when no challenge was matched
};

struct TraceEvent {
    double t = 0.0;
    std::string kind; // "issue" or "verify"
    std::string challenge_id;
    std::string verdict; // "pending" for issues
};

// The launch-pad site's side of the protocol. Challenge issuance and
// verification are serialized internally, so single-use consumption is
// atomic: no interleaving can accept the same challenge twice.
class ChallengeAuthority {
public:
    explicit ChallengeAuthority(std::uint64_t seed);

    // Issues a fresh challenge with a unique id and a 128-bit nonce. No mail
    // is ever sent to the claimed address — the trace records only issue and
    // verify events. Throws std::invalid_argument on a malformed address or
    // non-positive ttl.
    ValidationChallenge issue_challenge(const SubmissionRequest& form_submission,
                                        std::string_view claimed_address, double now,
                                        double ttl_minutes = 24.0 * 60.0);

    // Checks, in order: open relay (either the flag or a registered relay
    // identity) -> rejected_relay; presented nonce (missing -> bad_nonce,
    // unmatched -> unknown_challenge, matched but stale -> expired); claimed
    // sender must equal the challenge's address and the registry's server
    // for its domain must equal the originating server -> otherwise
    // origin_mismatch. Full success consumes the challenge: a replay is
    // rejected_unknown_challenge. Rejections never consume.
    ValidationOutcome verify(const ValidationEmail& email, const DomainRegistry& registry,
                             double now);

    // Forgets expired challenges (they would otherwise linger to keep the
    // rejected_expired verdict precise; after pruning they verify as
    // unknown_challenge). Returns how many were dropped.
    std::size_t prune_expired(double now);

    std::size_t pending_count() const;
    std::vector<TraceEvent> trace() const;

private:
    mutable std::mutex mutex_;
    Rng rng_;
    long next_id_ = 0;
    std::map<Nonce, ValidationChallenge> pending_;
    std::vector<TraceEvent> trace_;
};

// Protocol trace log: "timestamp<TAB>event_kind<TAB>challenge_id<TAB>verdict"
// lines, timestamps with millisecond-of-minute precision.
std::string trace_to_text(const std::vector<TraceEvent>& events);

// Builds the email an account holder can really produce: the originating
// server is the registry's identity for the account's own domain (empty if
// unregistered), regardless of the claimed sender; via a relay the origin
// becomes the relay's identity instead.
ValidationEmail craft_email(const DomainRegistry& registry,
                            const std::string& account_address,
                            const std::string& claimed_sender,
                            std::optional<Nonce> nonce, double received_at,
                            bool via_open_relay = false,
                            const std::string& relay_server = "");

struct AdversaryReport {
    long trials_per_adversary = 0;
    long false_accepts = 0;  // spoofer / guesser / relay acceptances (must be 0)
    long false_rejects = 0;  // honest-user rejections (must be 0)
    long insider_accepts = 0; // same-server insider: accepted by design
    bool insider_risk_flagged = false;
    // adversary name -> verdict name -> count
    std::map<std::string, std::map<std::string, long>> verdict_counts;
};

// Exercises the protocol against its caveats, trials times each:
//   honest    - controls the claimed address, presents its challenge's nonce;
//   spoofer   - claims the victim's address with the right nonce, but mails
//               from a foreign domain's server;
//   guesser   - controls a mailbox on the victim's own domain and tries
//               random nonces against challenges it never saw;
//   relay_user- right nonce, but delivered through an open relay;
//   insider   - controls the victim domain's server and holds the nonce: the
//               protocol accepts this by design, and the report flags it as
//               the residual risk instead of hiding it.
// The registry is augmented with the suite's standard domains and relay if
// they are missing. Deterministic in seed. Throws on trials < 1.
AdversaryReport run_adversary_suite(const DomainRegistry& registry, long trials,
                                    std::uint64_t seed);

// CSV: adversary,verdict,count — rows sorted by adversary then verdict.
std::string adversary_report_csv(const AdversaryReport& report);

// After an accepted validation, the requesting user's book learns the site's
// address so its later mail survives the cleaner. Throws std::invalid_argument
// on any non-accepted outcome; the book is left untouched.
void seed_address_book(const ValidationOutcome& outcome, const std::string& site_address,
                       ExtendedAddressBook& book, double now);

} // namespace formflood
