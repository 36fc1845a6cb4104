#include "formflood/defense.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "formflood/rng.hpp"

namespace formflood {

namespace {

bool contains(const std::vector<std::string>& haystack, const std::string& needle) {
    return std::find(haystack.begin(), haystack.end(), needle) != haystack.end();
}

std::string lowercased(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Days between 1970-01-01 and the given civil date (proleptic Gregorian).
long days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    if (m <= 2) ++y;
}

const long kEpochDays = days_from_civil(2026, 1, 1); // clock zero

constexpr long long kMsPerDay = 86400000LL;

long long floor_div(long long a, long long b) {
    long long q = a / b;
    if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

} // namespace

bool valid_address(std::string_view address) {
    const std::size_t at = address.find('@');
    if (at == std::string_view::npos || at == 0 || at + 1 == address.size()) return false;
    if (address.find('@', at + 1) != std::string_view::npos) return false;
    for (unsigned char c : address) {
        if (c <= 0x20 || c == 0x7f) return false;
    }
    return true;
}

std::string local_part_of(std::string_view address) {
    const std::size_t at = address.find('@');
    return std::string(at == std::string_view::npos ? address : address.substr(0, at));
}

std::string domain_of(std::string_view address) {
    const std::size_t at = address.find('@');
    if (at == std::string_view::npos) return "";
    return lowercased(address.substr(at + 1));
}

bool is_obscure_address(std::string_view address) {
    return valid_address(address) && local_part_of(address).size() >= 12;
}

std::string minutes_to_iso(double minutes) {
    const long long ms = std::llround(minutes * 60000.0);
    const long long day = floor_div(ms, kMsPerDay);
    long long of_day = ms - day * kMsPerDay;
    int y;
    unsigned mo, d;
    civil_from_days(kEpochDays + static_cast<long>(day), y, mo, d);
    const long long h = of_day / 3600000;
    of_day -= h * 3600000;
    const long long mi = of_day / 60000;
    of_day -= mi * 60000;
    const long long s = of_day / 1000;
    const long long msec = of_day - s * 1000;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", y, mo,
                  d, h, mi, s, msec);
    return buf;
}

double iso_to_minutes(const std::string& iso) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0, msec = 0;
    int consumed = 0;
    const int got = std::sscanf(iso.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u.%3uZ%n", &y, &mo,
                                &d, &h, &mi, &s, &msec, &consumed);
    if (got != 7 || static_cast<std::size_t>(consumed) != iso.size() || mo < 1 ||
        mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59) {
        throw std::runtime_error("malformed timestamp: " + iso);
    }
    const long long days = days_from_civil(y, mo, d) - kEpochDays;
    const long long ms =
        ((days * 24 + h) * 60 + mi) * 60000LL + s * 1000LL + msec;
    return static_cast<double>(ms) / 60000.0;
}

void ExtendedAddressBook::record_contact(std::string_view address, double now) {
    if (!valid_address(address)) {
        throw std::invalid_argument("invalid address: " + std::string(address));
    }
    entries[std::string(address)] = now;
}

bool ExtendedAddressBook::knows(std::string_view address, double now) const {
    auto it = entries.find(std::string(address));
    if (it == entries.end()) return false;
    return now - it->second <= max_age_minutes;
}

ExtendedAddressBook merge_books(const ExtendedAddressBook& a,
                                const ExtendedAddressBook& b) {
    ExtendedAddressBook out = a;
    for (const auto& [address, stamp] : b.entries) {
        auto it = out.entries.find(address);
        if (it == out.entries.end() || it->second < stamp) out.entries[address] = stamp;
    }
    return out;
}

void save_book(const ExtendedAddressBook& book, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write address book: " + path);
    for (const auto& [address, stamp] : book.entries) {
        out << address << '\t' << minutes_to_iso(stamp) << '\n';
    }
}

ExtendedAddressBook load_book(const std::string& path, double max_age_minutes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read address book: " + path);
    ExtendedAddressBook book;
    book.max_age_minutes = max_age_minutes;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error("address book " + path + " line " +
                                     std::to_string(line_no) + ": missing separator");
        }
        book.entries[line.substr(0, tab)] = iso_to_minutes(line.substr(tab + 1));
    }
    return book;
}

InboundMessage make_message(long id, std::string sender, double size, double arrival,
                            std::uint64_t body_hash, Origin label) {
    InboundMessage m;
    m.id = id;
    m.domain = domain_of(sender);
    m.sender_server = m.domain.empty() ? "" : "smtp." + m.domain;
    m.sender_address = std::move(sender);
    m.size = size;
    m.arrival = arrival;
    m.body_hash = body_hash;
    m.origin_label = label;
    return m;
}

double meter_probability(const MeterFeatures& features, const MeterWeights& weights) {
    const double ratio = std::max(features.rate_ratio, 1e-6);
    const double x = weights.rate_w * std::log(ratio) +
                     weights.unknown_w * features.unknown_fraction +
                     weights.duplicate_w * features.duplicate_fraction - weights.offset;
    return 1.0 / (1.0 + std::exp(-x));
}

MeterReading meter(const std::vector<InboundMessage>& window,
                   const ExtendedAddressBook& book, double baseline_rate,
                   const MeterWeights& weights) {
    if (!(baseline_rate > 0.0)) {
        throw std::invalid_argument("baseline_rate must be positive");
    }
    MeterReading reading;
    if (window.empty()) return reading;

    const double span = std::max(window.back().arrival - window.front().arrival, 1.0);
    const double now = window.back().arrival;
    reading.features.rate_ratio = (static_cast<double>(window.size()) / span) / baseline_rate;

    long unknown = 0;
    std::unordered_set<std::uint64_t> bodies;
    for (const InboundMessage& m : window) {
        if (!book.knows(m.sender_address, now)) ++unknown;
        bodies.insert(m.body_hash);
    }
    const double n = static_cast<double>(window.size());
    reading.features.unknown_fraction = static_cast<double>(unknown) / n;
    reading.features.duplicate_fraction = 1.0 - static_cast<double>(bodies.size()) / n;
    reading.probability_under_attack = meter_probability(reading.features, weights);
    return reading;
}

std::string_view persona_name(Persona p) {
    switch (p) {
        case Persona::Individual: return "individual";
        case Persona::Store: return "store";
        case Persona::Politician: return "politician";
    }
    return "unknown";
}

std::optional<Persona> persona_from_name(std::string_view name) {
    if (name == "individual") return Persona::Individual;
    if (name == "store") return Persona::Store;
    if (name == "politician") return Persona::Politician;
    return std::nullopt;
}

namespace {

std::string message_domain(const InboundMessage& m) {
    return m.domain.empty() ? domain_of(m.sender_address) : m.domain;
}

// Would this message survive the policy's removal filters? Filters only ever
// protect a message; they never widen suspicion.
bool removable_under_filters(const CleanerPolicy& policy, const InboundMessage& m) {
    if (policy.min_suspect_size && m.size < *policy.min_suspect_size) return false;
    const std::string dom = message_domain(m);
    if (contains(policy.domain_allow, dom)) return false;
    if (!policy.domain_deny.empty() && !contains(policy.domain_deny, dom)) return false;
    return true;
}

bool foreign_country_domain(const std::string& domain, const std::string& home) {
    if (home.empty()) return false; // no home configured, rule inactive
    const std::size_t dot = domain.rfind('.');
    const std::string tld =
        dot == std::string::npos ? domain : domain.substr(dot + 1);
    if (tld.size() != 2) return false; // generic top-level domains pass
    for (unsigned char c : tld) {
        if (!std::isalpha(c)) return false;
    }
    return tld != home;
}

} // namespace

Partition mark_suspects(const std::vector<InboundMessage>& window,
                        const ExtendedAddressBook& book, const CleanerPolicy& policy) {
    Partition out;

    // Per-sender in-window volume, for the store persona's loudness check.
    std::unordered_map<std::string, long> sender_counts;
    double span_hours = 1.0 / 60.0;
    if (policy.persona == Persona::Store && !window.empty()) {
        for (const InboundMessage& m : window) ++sender_counts[m.sender_address];
        span_hours =
            std::max(window.back().arrival - window.front().arrival, 1.0) / 60.0;
    }

    auto persona_suspect = [&](const InboundMessage& m) {
        switch (policy.persona) {
            case Persona::Individual:
                return !book.knows(m.sender_address, m.arrival);
            case Persona::Store: {
                auto rule_it = policy.collector_rules.find(message_domain(m));
                if (rule_it == policy.collector_rules.end()) {
                    return !book.knows(m.sender_address, m.arrival);
                }
                const CollectorRule& rule = rule_it->second;
                const std::string pseudonym = local_part_of(m.sender_address);
                auto rec_it = rule.pseudonyms.find(pseudonym);
                if (rec_it == rule.pseudonyms.end()) return true; // brand new
                const PseudonymRecord& rec = rec_it->second;
                if (m.arrival - rec.established_at < rule.min_account_age_minutes)
                    return true;
                if (rec.reputation < rule.min_reputation) return true;
                const double per_hour =
                    static_cast<double>(sender_counts[m.sender_address]) / span_hours;
                return per_hour > rule.volume_per_hour;
            }
            case Persona::Politician: {
                const std::string dom = message_domain(m);
                if (!contains(policy.constituent_domains, dom)) return true;
                return foreign_country_domain(dom, policy.home_country);
            }
        }
        return false;
    };

    for (const InboundMessage& m : window) {
        if (persona_suspect(m) && removable_under_filters(policy, m)) {
            out.suspect.push_back(m);
        } else {
            out.retained.push_back(m);
        }
    }
    return out;
}

void Inbox::add(const InboundMessage& m) {
    contents.push_back(m);
    ++state.message_count;
    state.total_bytes += m.size;
}

RemovalReport cleanup(Inbox& inbox, const std::vector<InboundMessage>& suspects,
                      const CleanerPolicy& policy) {
    RemovalReport report;
    std::unordered_map<long, std::size_t> index;
    index.reserve(inbox.contents.size());
    for (std::size_t i = 0; i < inbox.contents.size(); ++i) {
        index[inbox.contents[i].id] = i;
    }
    std::vector<bool> removed(inbox.contents.size(), false);

    for (const InboundMessage& s : suspects) {
        if (!removable_under_filters(policy, s)) continue;
        auto it = index.find(s.id);
        if (it == index.end() || removed[it->second]) {
            report.consistency_errors.push_back(
                "suspect " + std::to_string(s.id) + " from " + s.sender_address +
                " is not in the mailbox");
            continue;
        }
        const InboundMessage& victim = inbox.contents[it->second];
        removed[it->second] = true;
        ++report.removed_count;
        report.bytes_freed += victim.size;
        report.removed_ids.push_back(victim.id);
        if (policy.notify_sender) report.notified_senders.push_back(victim.sender_address);
        --inbox.state.message_count;
        inbox.state.total_bytes -= victim.size;
    }

    if (report.removed_count > 0) {
        std::vector<InboundMessage> kept;
        kept.reserve(inbox.contents.size() - static_cast<std::size_t>(report.removed_count));
        for (std::size_t i = 0; i < inbox.contents.size(); ++i) {
            if (!removed[i]) kept.push_back(std::move(inbox.contents[i]));
        }
        inbox.contents = std::move(kept);
    }
    return report;
}

DefenseMetrics evaluate_defense(const std::vector<InboundMessage>& attack_stream,
                                const std::vector<InboundMessage>& legit_stream,
                                const CleanerPolicy& policy,
                                const ExtendedAddressBook& book,
                                const EvaluationOptions& options) {
    std::vector<InboundMessage> all;
    all.reserve(attack_stream.size() + legit_stream.size());
    all.insert(all.end(), attack_stream.begin(), attack_stream.end());
    all.insert(all.end(), legit_stream.begin(), legit_stream.end());
    std::stable_sort(all.begin(), all.end(),
                     [](const InboundMessage& x, const InboundMessage& y) {
                         return x.arrival < y.arrival;
                     });
    std::unordered_map<long, Origin> origin_of;
    origin_of.reserve(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i].id = static_cast<long>(i); // unique across the merged trace
        origin_of[all[i].id] = all[i].origin_label;
    }

    DefenseMetrics metrics;
    metrics.attack_total = static_cast<long>(attack_stream.size());
    metrics.legit_total = static_cast<long>(legit_stream.size());

    Inbox inbox;
    std::size_t i = 0;
    while (i < all.size()) {
        const double window_id = std::floor(all[i].arrival / options.window_minutes);
        std::vector<InboundMessage> window;
        while (i < all.size() &&
               std::floor(all[i].arrival / options.window_minutes) == window_id) {
            inbox.add(all[i]);
            window.push_back(all[i]);
            ++i;
        }
        const MeterReading reading = meter(window, book, options.baseline_rate,
                                           options.weights);
        if (reading.probability_under_attack > options.trigger_threshold) {
            Partition part = mark_suspects(window, book, policy);
            RemovalReport report = cleanup(inbox, part.suspect, policy);
            ++metrics.cleanups_triggered;
            metrics.bytes_freed += report.bytes_freed;
            for (long id : report.removed_ids) {
                if (origin_of[id] == Origin::Attack) {
                    ++metrics.removed_attack;
                } else {
                    ++metrics.removed_legit;
                }
            }
        }
    }

    metrics.attack_recall =
        metrics.attack_total > 0
            ? static_cast<double>(metrics.removed_attack) / metrics.attack_total
            : 1.0;
    metrics.legit_retention =
        metrics.legit_total > 0
            ? static_cast<double>(metrics.legit_total - metrics.removed_legit) /
                  metrics.legit_total
            : 1.0;
    return metrics;
}

DefenseMetrics evaluate_defense(const AttackOutcome& outcome,
                                const std::vector<InboundMessage>& legit_stream,
                                const CleanerPolicy& policy,
                                const ExtendedAddressBook& book,
                                const EvaluationOptions& options) {
    return evaluate_defense(synthesize_attack_stream(outcome.series, 0xA77ACC0DULL),
                            legit_stream, policy, book, options);
}

std::vector<InboundMessage> synthesize_attack_stream(const TimeSeries& series,
                                                     std::uint64_t seed,
                                                     int sender_pool,
                                                     double duplicate_share) {
    if (sender_pool < 1) sender_pool = 1;
    Rng rng(mix_seed(seed, 0xA77ACCULL, 0));
    std::vector<InboundMessage> out;
    long prev_messages = 0;
    double prev_bytes = 0.0;
    long next_id = 0;
    for (const SeriesSample& s : series.samples) {
        const long dm = s.messages - prev_messages;
        const double db = s.bytes - prev_bytes;
        prev_messages = s.messages;
        prev_bytes = s.bytes;
        if (dm <= 0) continue;
        const double each = db / static_cast<double>(dm);
        for (long e = 0; e < dm; ++e) {
            const std::uint64_t k =
                uniform_index(rng, static_cast<std::uint64_t>(sender_pool));
            const std::string host = "pad-" + std::to_string(k) + ".example";
            std::uint64_t body;
            if (uniform01(rng) < duplicate_share) {
                body = splitmix64(mix_seed(seed, 0xB0D7ULL, k % 13));
            } else {
                body = splitmix64(
                    mix_seed(seed, 0xF00DULL, static_cast<std::uint64_t>(next_id)));
            }
            out.push_back(make_message(next_id, "promo@" + host, each, s.t, body,
                                       Origin::Attack));
            ++next_id;
        }
    }
    return out;
}

std::vector<InboundMessage> synthesize_legit_stream(double start_minutes,
                                                    double end_minutes,
                                                    double rate_per_min,
                                                    const std::vector<std::string>& senders,
                                                    std::uint64_t seed) {
    std::vector<InboundMessage> out;
    if (senders.empty() || !(rate_per_min > 0.0)) return out;
    Rng rng(mix_seed(seed, 0x1E617ULL, 0));
    const Dist gap = Dist::exponential(1.0 / rate_per_min);
    const Dist size = Dist::lognormal(2000.0, 0.6).clamped(200.0, 50000.0);
    double t = start_minutes;
    long id = 0;
    for (;;) {
        t += gap.sample(rng);
        if (t >= end_minutes) break;
        const std::string& sender =
            senders[uniform_index(rng, static_cast<std::uint64_t>(senders.size()))];
        const std::uint64_t body =
            splitmix64(mix_seed(seed, 0x5AFEULL, static_cast<std::uint64_t>(id)));
        out.push_back(
            make_message(id, sender, size.sample(rng), t, body, Origin::Legitimate));
        ++id;
    }
    return out;
}

std::string metrics_csv(Persona persona, const DefenseMetrics& metrics,
                        double threshold) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.1f,%.2f\n",
                  std::string(persona_name(persona)).c_str(), metrics.attack_recall,
                  metrics.legit_retention, metrics.bytes_freed, threshold);
    return std::string("persona,attack_recall,legit_retention,bytes_freed,threshold\n") +
           buf;
}

} // namespace formflood
