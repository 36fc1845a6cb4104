#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "formflood/rng.hpp"

namespace formflood {

enum class FieldKind { Text, Hidden, Select, Radio, Checkbox, Submit, Other };

std::string field_kind_name(FieldKind k);

// One logical form control. Radio and checkbox inputs sharing a name collapse
// into a single field whose `options` lists the possible values in document
// order. Selects carry their option values the same way.
struct InputField {
    std::string name;
    FieldKind kind = FieldKind::Text;
    std::string default_value;
    std::vector<std::string> options;
};

struct HtmlForm {
    std::string action;  // resolved: a missing/empty action posts back to the page
    std::string method;  // uppercased; defaults to GET
    std::vector<InputField> fields;
    std::string source_page;
};

// Extract every form from a page. Total over malformed markup: unclosed tags,
// uppercase names, single/double/missing quotes, stray text, and truncated
// files all yield whatever structure could be recovered, never an error.
std::vector<HtmlForm> parse_forms(std::string_view html, const std::string& source_page);

// Substring markers used to recognize and fill fields, all matched
// case-insensitively against a field's name and default text.
struct Lexicons {
    std::vector<std::string> email_markers;
    std::vector<std::string> name_markers;
    std::vector<std::string> phone_markers;
    std::string junk_filler;

    static Lexicons defaults();
};

bool field_matches(const InputField& f, const std::vector<std::string>& markers);

// A form is usable as an unwitting sender ("launch pad") when some visible
// text field advertises that it takes an address and no human check guards
// the page.
bool is_launch_pad(const HtmlForm& form, const Lexicons& lex, bool page_has_captcha);

struct Victim {
    std::string email;
    std::string name;
    std::string phone; // empty = unknown, junk-filled
    // Exact-name payload overrides, checked before any marker matching.
    std::vector<std::pair<std::string, std::string>> extra_fields;
};

// What a submission WOULD contain. Synthesized only; nothing in this codebase
// transmits these anywhere.
struct SubmissionRequest {
    std::string action;
    std::string method;
    std::vector<std::pair<std::string, std::string>> payload;
    std::string source_page;
};

// Deterministically fill a form for the given victim. Every non-submit field
// contributes exactly one payload pair (checkbox groups join their options
// with commas); submit controls are included only when named.
SubmissionRequest fill_form(const HtmlForm& form, const Victim& victim, const Lexicons& lex,
                            Rng& rng);

// Build search-engine query strings offline: the base query alone, then the
// base plus every quoted subset of `terms` up to `max_extra` terms, ordered by
// subset size and then by term position.
std::vector<std::string> generate_queries(const std::string& base,
                                          const std::vector<std::string>& terms,
                                          std::size_t max_extra);

struct PageLabel {
    bool captcha = false;
    bool suitable = false; // ground-truth annotation, used by tests only
};

// Optional per-page annotations: TSV columns page, captcha, suitable with a
// header row. The captcha flag stands in for visual inspection the markup
// alone can't provide. A missing file yields an empty map.
std::map<std::string, PageLabel> load_labels(const std::filesystem::path& tsv);

struct HarvestStats {
    int pages_scanned = 0;
    int pages_with_forms = 0;
    int forms_found = 0;
    int launch_pad_pages = 0;
    std::vector<HtmlForm> launch_pads;
    std::vector<std::string> errors; // unreadable or binary pages, by name

    double harvest_rate() const; // launch-pad pages / pages scanned
};

// Scan every *.html file in `dir` (sorted by name), classify forms, and apply
// captcha flags from labels.tsv when present. Throws std::runtime_error if
// the directory is missing or holds no pages.
HarvestStats harvest_corpus(const std::filesystem::path& dir, const Lexicons& lex);

// One JSON object per line: {action, method, fields:[{name,kind,default,options}], source_page}.
std::string launch_pads_to_jsonl(const std::vector<HtmlForm>& pads);

} // namespace formflood
