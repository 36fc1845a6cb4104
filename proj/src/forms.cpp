#include "formflood/forms.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace formflood {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool ci_contains(std::string_view hay, std::string_view needle) {
    if (needle.empty()) return false;
    std::string h = lower(hay), n = lower(needle);
    return h.find(n) != std::string::npos;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

struct Tag {
    std::string name; // lowercased
    bool closing = false;
    std::vector<std::pair<std::string, std::string>> attrs;
    std::size_t content_begin = 0; // index just past the '>' (or EOF)

    const std::string* attr(std::string_view key) const {
        for (const auto& [k, v] : attrs)
            if (k == key) return &v;
        return nullptr;
    }
    std::string attr_or(std::string_view key, std::string fallback) const {
        const std::string* v = attr(key);
        return v ? *v : std::move(fallback);
    }
    bool has(std::string_view key) const { return attr(key) != nullptr; }
};

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':';
}

// Scan forward from `pos` for the next real tag, skipping comments, doctype
// declarations, and stray '<' characters. Returns false at end of input.
bool next_tag(std::string_view html, std::size_t& pos, Tag& tag) {
    const std::size_t n = html.size();
    while (pos < n) {
        std::size_t lt = html.find('<', pos);
        if (lt == std::string_view::npos) {
            pos = n;
            return false;
        }
        std::size_t p = lt + 1;
        if (p >= n) {
            pos = n;
            return false;
        }
        if (html.compare(lt, 4, "<!--") == 0) {
            std::size_t end = html.find("-->", lt + 4);
            pos = end == std::string_view::npos ? n : end + 3;
            continue;
        }
        if (html[p] == '!' || html[p] == '?') {
            std::size_t end = html.find('>', p);
            pos = end == std::string_view::npos ? n : end + 1;
            continue;
        }
        bool closing = false;
        if (html[p] == '/') {
            closing = true;
            ++p;
        }
        if (p >= n || !std::isalpha(static_cast<unsigned char>(html[p]))) {
            pos = lt + 1; // literal '<' in text
            continue;
        }
        std::size_t name_start = p;
        while (p < n && is_name_char(html[p])) ++p;
        tag.name = lower(html.substr(name_start, p - name_start));
        tag.closing = closing;
        tag.attrs.clear();

        // Attributes: tolerant of missing quotes, '/', and truncation.
        while (p < n && html[p] != '>') {
            while (p < n && (std::isspace(static_cast<unsigned char>(html[p])) || html[p] == '/'))
                ++p;
            if (p >= n || html[p] == '>') break;
            std::size_t as = p;
            while (p < n && !std::isspace(static_cast<unsigned char>(html[p])) && html[p] != '=' &&
                   html[p] != '>' && html[p] != '/')
                ++p;
            if (p == as) {
                ++p;
                continue;
            }
            std::string aname = lower(html.substr(as, p - as));
            std::string aval;
            while (p < n && std::isspace(static_cast<unsigned char>(html[p]))) ++p;
            if (p < n && html[p] == '=') {
                ++p;
                while (p < n && std::isspace(static_cast<unsigned char>(html[p]))) ++p;
                if (p < n && (html[p] == '"' || html[p] == '\'')) {
                    char q = html[p++];
                    std::size_t vs = p;
                    while (p < n && html[p] != q) ++p;
                    aval.assign(html.substr(vs, p - vs));
                    if (p < n) ++p;
                } else {
                    std::size_t vs = p;
                    while (p < n && !std::isspace(static_cast<unsigned char>(html[p])) &&
                           html[p] != '>')
                        ++p;
                    aval.assign(html.substr(vs, p - vs));
                }
            }
            tag.attrs.emplace_back(std::move(aname), std::move(aval));
        }
        tag.content_begin = p < n ? p + 1 : n;
        pos = tag.content_begin;
        return true;
    }
    return false;
}

// Raw text following a tag, up to the next '<'. Used for <option> labels.
std::string text_until_tag(std::string_view html, std::size_t from) {
    std::size_t lt = html.find('<', from);
    if (lt == std::string_view::npos) lt = html.size();
    return trim(html.substr(from, lt - from));
}

// Case-insensitive search for "</name" returning the index past its '>'.
std::size_t skip_element_content(std::string_view html, std::size_t from,
                                 std::string_view name, std::string* content) {
    std::string close = "</" + std::string(name);
    std::string hlow = lower(html.substr(from));
    std::size_t rel = hlow.find(close);
    if (rel == std::string::npos) {
        if (content) *content = trim(html.substr(from));
        return html.size();
    }
    if (content) *content = trim(html.substr(from, rel));
    std::size_t gt = html.find('>', from + rel);
    return gt == std::string_view::npos ? html.size() : gt + 1;
}

struct SelectState {
    bool open = false;
    InputField field;
    int selected = -1; // first option carrying the selected attribute
};

} // namespace

std::string field_kind_name(FieldKind k) {
    switch (k) {
    case FieldKind::Text: return "text";
    case FieldKind::Hidden: return "hidden";
    case FieldKind::Select: return "select";
    case FieldKind::Radio: return "radio";
    case FieldKind::Checkbox: return "checkbox";
    case FieldKind::Submit: return "submit";
    case FieldKind::Other: return "other";
    }
    return "other";
}

std::vector<HtmlForm> parse_forms(std::string_view html, const std::string& source_page) {
    std::vector<HtmlForm> forms;
    bool in_form = false;
    HtmlForm cur;
    SelectState sel;
    // Radio/checkbox groups: name -> index into cur.fields.
    std::map<std::string, std::size_t> radio_groups;
    std::map<std::string, std::size_t> checkbox_groups;

    auto close_select = [&] {
        if (!sel.open) return;
        sel.open = false;
        if (sel.field.name.empty()) return;
        if (sel.field.options.empty()) sel.field.options.push_back("");
        int pick = sel.selected >= 0 ? sel.selected : 0;
        sel.field.default_value = sel.field.options[static_cast<std::size_t>(pick)];
        cur.fields.push_back(std::move(sel.field));
        sel.field = InputField{};
        sel.selected = -1;
    };
    auto close_form = [&] {
        if (!in_form) return;
        close_select();
        forms.push_back(std::move(cur));
        cur = HtmlForm{};
        radio_groups.clear();
        checkbox_groups.clear();
        in_form = false;
    };

    std::size_t pos = 0;
    Tag tag;
    while (next_tag(html, pos, tag)) {
        if (tag.name == "script" || tag.name == "style") {
            if (!tag.closing) pos = skip_element_content(html, tag.content_begin, tag.name, nullptr);
            continue;
        }
        if (tag.name == "form") {
            if (tag.closing) {
                close_form();
                continue;
            }
            close_form();
            in_form = true;
            cur.source_page = source_page;
            cur.action = tag.attr_or("action", "");
            if (cur.action.empty()) cur.action = source_page;
            std::string method = lower(tag.attr_or("method", "get"));
            std::transform(method.begin(), method.end(), method.begin(),
                           [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
            cur.method = method.empty() ? "GET" : method;
            continue;
        }
        if (tag.name == "textarea" && !tag.closing) {
            std::string content;
            pos = skip_element_content(html, tag.content_begin, "textarea", &content);
            if (!in_form) continue;
            std::string name = tag.attr_or("name", "");
            if (name.empty()) continue;
            cur.fields.push_back(InputField{name, FieldKind::Other, content, {}});
            continue;
        }
        if (!in_form) continue;

        if (tag.name == "select") {
            close_select();
            if (tag.closing) continue;
            sel.open = true;
            sel.field = InputField{tag.attr_or("name", ""), FieldKind::Select, "", {}};
            sel.selected = -1;
            continue;
        }
        if (tag.name == "option") {
            if (tag.closing || !sel.open) continue;
            const std::string* v = tag.attr(std::string_view("value"));
            std::string value = v ? *v : text_until_tag(html, tag.content_begin);
            if (tag.has("selected") && sel.selected < 0)
                sel.selected = static_cast<int>(sel.field.options.size());
            sel.field.options.push_back(std::move(value));
            continue;
        }
        if (tag.name == "button") {
            if (tag.closing) continue;
            std::string name = tag.attr_or("name", "");
            if (name.empty()) continue;
            std::string type = lower(tag.attr_or("type", "submit"));
            FieldKind kind = type == "submit" ? FieldKind::Submit : FieldKind::Other;
            cur.fields.push_back(InputField{name, kind, tag.attr_or("value", ""), {}});
            continue;
        }
        if (tag.name != "input" || tag.closing) continue;

        std::string name = tag.attr_or("name", "");
        if (name.empty()) continue; // nothing to submit under
        std::string type = lower(tag.attr_or("type", "text"));
        if (type.empty()) type = "text";

        if (type == "radio" || type == "checkbox") {
            auto& groups = type == "radio" ? radio_groups : checkbox_groups;
            FieldKind kind = type == "radio" ? FieldKind::Radio : FieldKind::Checkbox;
            std::string value = tag.attr_or("value", "on");
            auto it = groups.find(name);
            if (it == groups.end()) {
                groups.emplace(name, cur.fields.size());
                cur.fields.push_back(InputField{name, kind, "", {}});
                it = groups.find(name);
            }
            InputField& group = cur.fields[it->second];
            group.options.push_back(value);
            if (tag.has("checked")) {
                if (kind == FieldKind::Radio) {
                    group.default_value = value;
                } else {
                    if (!group.default_value.empty()) group.default_value += ",";
                    group.default_value += value;
                }
            }
            continue;
        }

        FieldKind kind;
        if (type == "text" || type == "email" || type == "search" || type == "tel") {
            kind = FieldKind::Text;
        } else if (type == "hidden") {
            kind = FieldKind::Hidden;
        } else if (type == "submit" || type == "image") {
            kind = FieldKind::Submit;
        } else {
            kind = FieldKind::Other; // password, file, button, unknown types
        }
        cur.fields.push_back(InputField{name, kind, tag.attr_or("value", ""), {}});
    }
    close_form();
    return forms;
}

Lexicons Lexicons::defaults() {
    Lexicons lex;
    lex.email_markers = {"email", "e-mail", "mail", "addr"};
    lex.name_markers = {"name", "user", "login", "nick"};
    lex.phone_markers = {"phone", "tel", "mobile"};
    lex.junk_filler = "xxxx";
    return lex;
}

bool field_matches(const InputField& f, const std::vector<std::string>& markers) {
    for (const auto& m : markers)
        if (ci_contains(f.name, m) || ci_contains(f.default_value, m)) return true;
    return false;
}

bool is_launch_pad(const HtmlForm& form, const Lexicons& lex, bool page_has_captcha) {
    if (page_has_captcha) return false;
    for (const auto& f : form.fields)
        if (f.kind == FieldKind::Text && field_matches(f, lex.email_markers)) return true;
    return false;
}

namespace {

std::string text_fill_value(const InputField& f, const Victim& victim, const Lexicons& lex) {
    for (const auto& [k, v] : victim.extra_fields)
        if (k == f.name) return v;
    if (field_matches(f, lex.email_markers)) return victim.email;
    if (field_matches(f, lex.name_markers)) return victim.name;
    if (field_matches(f, lex.phone_markers))
        return victim.phone.empty() ? lex.junk_filler : victim.phone;
    return lex.junk_filler;
}

std::string join_options(const std::vector<std::string>& opts) {
    std::string out;
    for (std::size_t i = 0; i < opts.size(); ++i) {
        if (i) out += ",";
        out += opts[i];
    }
    return out;
}

} // namespace

SubmissionRequest fill_form(const HtmlForm& form, const Victim& victim, const Lexicons& lex,
                            Rng& rng) {
    SubmissionRequest req;
    req.action = form.action;
    req.method = form.method;
    req.source_page = form.source_page;
    for (const auto& f : form.fields) {
        switch (f.kind) {
        case FieldKind::Submit:
            req.payload.emplace_back(f.name, f.default_value);
            break;
        case FieldKind::Hidden:
            req.payload.emplace_back(f.name, f.default_value);
            break;
        case FieldKind::Radio:
        case FieldKind::Select: {
            std::string value =
                f.options.empty() ? f.default_value
                                  : f.options[uniform_index(rng, f.options.size())];
            req.payload.emplace_back(f.name, std::move(value));
            break;
        }
        case FieldKind::Checkbox:
            req.payload.emplace_back(f.name, join_options(f.options));
            break;
        case FieldKind::Text:
        case FieldKind::Other:
            req.payload.emplace_back(f.name, text_fill_value(f, victim, lex));
            break;
        }
    }
    return req;
}

std::vector<std::string> generate_queries(const std::string& base,
                                          const std::vector<std::string>& terms,
                                          std::size_t max_extra) {
    std::vector<std::string> out;
    out.push_back(base);
    std::size_t n = terms.size();
    for (std::size_t k = 1; k <= std::min(max_extra, n); ++k) {
        std::vector<std::size_t> idx(k);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (;;) {
            std::string q = base;
            for (std::size_t i : idx) {
                if (!q.empty()) q += ' ';
                q += '"' + terms[i] + '"';
            }
            out.push_back(std::move(q));
            // advance to the next index combination
            std::size_t j = k;
            while (j > 0 && idx[j - 1] == n - k + (j - 1)) --j;
            if (j == 0) break;
            ++idx[j - 1];
            for (std::size_t l = j; l < k; ++l) idx[l] = idx[l - 1] + 1;
        }
    }
    return out;
}

std::map<std::string, PageLabel> load_labels(const std::filesystem::path& tsv) {
    std::map<std::string, PageLabel> labels;
    std::ifstream in(tsv);
    if (!in) return labels;
    std::string line;
    auto truthy = [](const std::string& s) {
        return s == "1" || s == "true" || s == "yes";
    };
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string page, captcha, suitable;
        std::getline(ls, page, '\t');
        std::getline(ls, captcha, '\t');
        std::getline(ls, suitable, '\t');
        if (page == "page") continue; // header row
        labels[page] = PageLabel{truthy(captcha), truthy(suitable)};
    }
    return labels;
}

double HarvestStats::harvest_rate() const {
    return pages_scanned > 0 ? static_cast<double>(launch_pad_pages) / pages_scanned : 0.0;
}

HarvestStats harvest_corpus(const std::filesystem::path& dir, const Lexicons& lex) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir) || !fs::is_directory(dir))
        throw std::runtime_error("corpus directory not found: " + dir.string());

    std::vector<fs::path> pages;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".html")
            pages.push_back(entry.path());
    if (pages.empty())
        throw std::runtime_error("no .html pages in corpus directory: " + dir.string());
    std::sort(pages.begin(), pages.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    auto labels = load_labels(dir / "labels.tsv");

    HarvestStats stats;
    for (const auto& page : pages) {
        ++stats.pages_scanned;
        std::string name = page.filename().string();
        std::ifstream in(page, std::ios::binary);
        std::string html((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (!in.good() && !in.eof()) {
            stats.errors.push_back(name + ": unreadable");
            continue;
        }
        if (html.find('\0') != std::string::npos) {
            stats.errors.push_back(name + ": contains NUL byte, not a text page");
            continue;
        }
        auto forms = parse_forms(html, name);
        stats.forms_found += static_cast<int>(forms.size());
        if (!forms.empty()) ++stats.pages_with_forms;
        bool captcha = false;
        if (auto it = labels.find(name); it != labels.end()) captcha = it->second.captcha;
        bool any_pad = false;
        for (auto& f : forms) {
            if (is_launch_pad(f, lex, captcha)) {
                stats.launch_pads.push_back(std::move(f));
                any_pad = true;
            }
        }
        if (any_pad) ++stats.launch_pad_pages;
    }
    return stats;
}

std::string launch_pads_to_jsonl(const std::vector<HtmlForm>& pads) {
    std::string out;
    for (const auto& form : pads) {
        nlohmann::ordered_json j;
        j["action"] = form.action;
        j["method"] = form.method;
        j["fields"] = nlohmann::ordered_json::array();
        for (const auto& f : form.fields) {
            nlohmann::ordered_json jf;
            jf["name"] = f.name;
            jf["kind"] = field_kind_name(f.kind);
            jf["default"] = f.default_value;
            jf["options"] = f.options;
            j["fields"].push_back(std::move(jf));
        }
        j["source_page"] = form.source_page;
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace formflood
