#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "formflood/sim.hpp"

namespace formflood {

// --- Addresses and simulation-clock timestamps -----------------------------

// Minimal syntactic check: one '@', non-empty local part and domain, no
// whitespace or control characters.
bool valid_address(std::string_view address);

std::string local_part_of(std::string_view address);
std::string domain_of(std::string_view address); // lowercased

// Hard-to-guess private alias: judged purely by local-part length (>= 12).
bool is_obscure_address(std::string_view address);

// The simulation clock is minutes since 2026-01-01T00:00:00Z; persisted
// timestamps are ISO-8601 UTC with millisecond precision so that
// save -> load -> save reproduces files byte for byte.
std::string minutes_to_iso(double minutes);
double iso_to_minutes(const std::string& iso); // throws std::runtime_error

// --- Extended address book --------------------------------------------------

// Every party the user has corresponded with, stamped with the last contact
// time. Entries older than max_age behave exactly as if absent.
struct ExtendedAddressBook {
    std::map<std::string, double> entries; // address -> last contact (minutes)
    double max_age_minutes = 30.0 * 24.0 * 60.0;

    // Throws std::invalid_argument on a syntactically invalid address.
    void record_contact(std::string_view address, double now);
    bool knows(std::string_view address, double now) const;
};

// Shared-book read-merge; on conflicting entries the newest timestamp wins.
// The result keeps the first book's max_age.
ExtendedAddressBook merge_books(const ExtendedAddressBook& a,
                                const ExtendedAddressBook& b);

// Persistence: one "address<TAB>iso-timestamp" line per entry, sorted by
// address. load throws std::runtime_error on unreadable or malformed files.
void save_book(const ExtendedAddressBook& book, const std::string& path);
ExtendedAddressBook load_book(const std::string& path,
                              double max_age_minutes = 30.0 * 24.0 * 60.0);

// --- Inbound traffic --------------------------------------------------------

enum class Origin { Legitimate, Attack };

struct InboundMessage {
    long id = 0;
    std::string sender_address;
    std::string sender_server;
    double size = 0.0;    // bytes
    double arrival = 0.0; // minutes
    std::uint64_t body_hash = 0;
    std::string domain; // derived from sender_address
    // Ground truth for scoring only. No detection or cleanup decision may
    // read it; the label-flip property test enforces that.
    Origin origin_label = Origin::Legitimate;
};

InboundMessage make_message(long id, std::string sender, double size, double arrival,
                            std::uint64_t body_hash, Origin label);

// --- Attack meter -----------------------------------------------------------

struct MeterFeatures {
    double rate_ratio = 0.0;        // window rate / baseline rate
    double unknown_fraction = 0.0;  // share of messages from unknown senders
    double duplicate_fraction = 0.0; // 1 - distinct(body_hash) / count
};

struct MeterReading {
    double probability_under_attack = 0.0;
    MeterFeatures features;
};

// probability = sigmoid(rate_w * ln(rate_ratio) + unknown_w * unknown_fraction
//                       + duplicate_w * duplicate_fraction - offset)
// The rate_ratio is floored at 1e-6 before the log. With the defaults a calm
// window (ratio 1, nothing unknown, no duplicates) scores sigmoid(-4) ~ 0.018.
struct MeterWeights {
    double rate_w = 1.5;
    double unknown_w = 3.0;
    double duplicate_w = 2.0;
    double offset = 4.0;
};

double meter_probability(const MeterFeatures& features, const MeterWeights& weights = {});

// Pure function of the window and book. The window rate divides the message
// count by the window span, floored at one minute; sender knowledge is
// judged at the window's final arrival time. Empty window -> probability 0
// with zeroed features. Throws std::invalid_argument unless baseline > 0.
MeterReading meter(const std::vector<InboundMessage>& window,
                   const ExtendedAddressBook& book, double baseline_rate,
                   const MeterWeights& weights = {});

// --- Cleaner policies -------------------------------------------------------

enum class Persona { Individual, Store, Politician };

std::string_view persona_name(Persona p);
std::optional<Persona> persona_from_name(std::string_view name);

struct PseudonymRecord {
    double established_at = 0.0; // minutes
    double reputation = 0.0;     // accumulated feedback score in [0, 1]
};

// A collector is a relay (auction house, marketplace) whose senders are
// per-pseudonym: mail from it is exempt from the unknown-sender rule unless
// the pseudonym is too loud, too new, unknown, or poorly reviewed.
struct CollectorRule {
    double volume_per_hour = 5.0;                    // max in-window rate
    double min_account_age_minutes = 7.0 * 24.0 * 60.0;
    double min_reputation = 0.2;
    std::map<std::string, PseudonymRecord> pseudonyms; // local part -> record
};

struct CleanerPolicy {
    Persona persona = Persona::Individual;

    // Removal filters shared by all personas: they only ever exempt a
    // message from removal, never widen suspicion.
    std::optional<double> min_suspect_size; // bytes
    std::vector<std::string> domain_allow;  // never removed
    std::vector<std::string> domain_deny;   // when non-empty, only these removable

    // Store persona: collector domain -> rule.
    std::map<std::string, CollectorRule> collector_rules;

    // Politician persona: constituent ISP domains plus home country code.
    std::vector<std::string> constituent_domains;
    std::string home_country; // two-letter code, lowercase

    bool notify_sender = false;
};

// --- Suspect marking and cleanup ---------------------------------------------

struct Partition {
    std::vector<InboundMessage> suspect;
    std::vector<InboundMessage> retained;
};

// Splits a window into suspect/retained (complete and disjoint).
//   individual: suspect iff the sender is absent from (or expired in) the
//     book, judged at each message's arrival.
//   store: senders from collector domains are judged by their pseudonym
//     (unknown, younger than the age threshold, reputation below the floor,
//     or in-window rate above volume_per_hour => suspect) regardless of the
//     book — the collector relays many users, so the pseudonym is the
//     identity; everyone else follows the individual rule.
//   politician: suspect iff the sender domain is outside the constituent
//     list, or carries a two-letter country-code TLD different from
//     home_country; the book is not consulted.
// The shared removal filters are then applied, moving exempted messages back
// to retained.
Partition mark_suspects(const std::vector<InboundMessage>& window,
                        const ExtendedAddressBook& book, const CleanerPolicy& policy);

// A mailbox with its contents tracked by message id.
struct Inbox {
    MailboxState state;
    std::vector<InboundMessage> contents;

    void add(const InboundMessage& m);
};

struct RemovalReport {
    long removed_count = 0;
    double bytes_freed = 0.0;
    std::vector<long> removed_ids;
    std::vector<std::string> notified_senders; // recorded, never transmitted
    // One note per suspect that was not present in the inbox (e.g. already
    // removed). Such suspects are skipped, which keeps repeated cleanup a
    // no-op instead of double-deleting.
    std::vector<std::string> consistency_errors;
};

// Removes the suspects that pass the policy's removal filters, decrementing
// the mailbox state by exactly the removed sizes.
RemovalReport cleanup(Inbox& inbox, const std::vector<InboundMessage>& suspects,
                      const CleanerPolicy& policy);

// --- Evaluation harness -----------------------------------------------------

struct DefenseMetrics {
    double attack_recall = 1.0;    // removed attack messages / attack messages
    double legit_retention = 1.0;  // retained legitimate / legitimate
    double bytes_freed = 0.0;
    long attack_total = 0;
    long legit_total = 0;
    long removed_attack = 0;
    long removed_legit = 0;
    int cleanups_triggered = 0;
};

struct EvaluationOptions {
    double baseline_rate = 0.5;     // messages per minute considered normal
    double trigger_threshold = 0.8; // cleanup fires above this probability
    double window_minutes = 60.0;   // tumbling meter windows
    MeterWeights weights{};
};

// Replays merged attack + legitimate traffic through tumbling windows,
// metering each; when the probability exceeds the threshold, suspects from
// that window are marked and cleaned out of the accumulated inbox. Scores
// against the ground-truth labels (which the defense path itself never
// reads). Ratios are vacuously 1.0 when a class is empty.
DefenseMetrics evaluate_defense(const std::vector<InboundMessage>& attack_stream,
                                const std::vector<InboundMessage>& legit_stream,
                                const CleanerPolicy& policy,
                                const ExtendedAddressBook& book,
                                const EvaluationOptions& options = {});

// Convenience overload: derives the attack stream from a simulated outcome's
// accepted trajectory via synthesize_attack_stream.
DefenseMetrics evaluate_defense(const AttackOutcome& outcome,
                                const std::vector<InboundMessage>& legit_stream,
                                const CleanerPolicy& policy,
                                const ExtendedAddressBook& book,
                                const EvaluationOptions& options = {});

// Reconstructs per-message deliveries from a trajectory (coalesced samples
// split their byte increment evenly) and dresses them as labeled attack
// traffic: senders drawn from a pool of launch-pad addresses, a configurable
// share of recurring bodies for duplicate detection. Deterministic in seed.
std::vector<InboundMessage> synthesize_attack_stream(const TimeSeries& series,
                                                     std::uint64_t seed,
                                                     int sender_pool = 200,
                                                     double duplicate_share = 0.3);

// Legitimate background traffic: exponential inter-arrival gaps at the given
// rate, senders cycled uniformly from the provided list.
std::vector<InboundMessage> synthesize_legit_stream(double start_minutes,
                                                    double end_minutes,
                                                    double rate_per_min,
                                                    const std::vector<std::string>& senders,
                                                    std::uint64_t seed);

// CSV export: persona,attack_recall,legit_retention,bytes_freed,threshold
std::string metrics_csv(Persona persona, const DefenseMetrics& metrics,
                        double threshold);

} // namespace formflood
