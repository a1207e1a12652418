#include "kgdiv/entities.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "kgdiv/csv.hpp"

namespace kgdiv::entities {

namespace {

char fold(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string folded(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), fold);
    return out;
}

// Bytes >= 0x80 belong to multi-byte UTF-8 letters, so they count as word characters.
bool is_word_byte(char c) {
    auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z');
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w)
        out.push_back(w);
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

EntityMention make_rule_mention(const TextDocument& doc, const MatchRule& rule, std::size_t start, std::size_t end) {
    EntityMention m;
    m.doc_id = doc.doc_id;
    m.char_start = start;
    m.char_end = end;
    m.surface = doc.text.substr(start, end - start);
    m.provenance = Provenance::rule;
    if (rule.is_unnamed())
        m.category = rule.target;
    else
        m.resolved_id = rule.target;
    return m;
}

void match_surface(const TextDocument& doc, const MatchRule& rule, std::vector<EntityMention>& out) {
    const std::string hay = rule.case_sensitive ? doc.text : folded(doc.text);
    const std::string needle = rule.case_sensitive ? rule.pattern : folded(rule.pattern);
    const bool check_left = is_word_byte(needle.front());
    const bool check_right = is_word_byte(needle.back());
    std::size_t pos = 0;
    while (pos + needle.size() <= hay.size()) {
        auto at = hay.find(needle, pos);
        if (at == std::string::npos)
            break;
        auto end = at + needle.size();
        bool left_ok = !check_left || at == 0 || !is_word_byte(hay[at - 1]);
        bool right_ok = !check_right || end == hay.size() || !is_word_byte(hay[end]);
        if (left_ok && right_ok) {
            out.push_back(make_rule_mention(doc, rule, at, end));
            pos = end;
        } else {
            pos = at + 1;
        }
    }
}

void match_lemma(const TextDocument& doc, const MatchRule& rule, std::vector<EntityMention>& out) {
    if (!doc.tokens)
        throw PipelineError(fmt::format("document '{}' has no lemma layer for lemma rule '{}'", doc.doc_id, rule.pattern));
    auto parts = split_ws(rule.pattern);
    if (!rule.case_sensitive)
        for (auto& p : parts)
            p = folded(p);
    const auto& toks = *doc.tokens;
    std::size_t i = 0;
    while (i + parts.size() <= toks.size()) {
        bool hit = true;
        for (std::size_t k = 0; k < parts.size() && hit; ++k) {
            const auto& lemma = toks[i + k].lemma;
            hit = rule.case_sensitive ? lemma == parts[k] : folded(lemma) == parts[k];
        }
        if (hit) {
            out.push_back(make_rule_mention(doc, rule, toks[i].char_start, toks[i + parts.size() - 1].char_end));
            i += parts.size();
        } else {
            ++i;
        }
    }
}

bool parse_bool(std::string_view s, bool& out) {
    auto f = folded(trim(s));
    if (f == "true" || f == "1" || f == "yes") {
        out = true;
        return true;
    }
    if (f == "false" || f == "0" || f == "no") {
        out = false;
        return true;
    }
    return false;
}

} // namespace

void TextDocument::validate() const {
    if (!tokens)
        return;
    std::size_t prev_end = 0;
    for (const auto& t : *tokens) {
        if (t.char_start >= t.char_end || t.char_end > text.size())
            throw PipelineError(fmt::format("document '{}': token '{}' span [{}, {}) is out of bounds", doc_id,
                                            t.surface, t.char_start, t.char_end));
        if (t.char_start < prev_end)
            throw PipelineError(fmt::format("document '{}': token '{}' overlaps its predecessor", doc_id, t.surface));
        prev_end = t.char_end;
    }
}

void MatchRule::validate() const {
    if (trim(pattern).empty())
        throw PipelineError("match rule with an empty pattern");
    if (target.empty())
        throw PipelineError(fmt::format("match rule '{}' has no target", pattern));
    if (is_unnamed()) {
        auto label = std::string_view(target).substr(8);
        if (label.empty() || label.find("://") != std::string_view::npos)
            throw PipelineError(fmt::format("match rule '{}': unnamed target '{}' must be a plain label", pattern, target));
    }
}

std::vector<MatchRule> parse_rules_csv(std::string_view text, std::string_view what) {
    auto table = csv::parse_table(text, what);
    table.require_columns({"pattern", "case_sensitive", "match_layer", "target"}, what);
    auto c_pat = table.column("pattern");
    auto c_cs = table.column("case_sensitive");
    auto c_layer = table.column("match_layer");
    auto c_target = table.column("target");
    std::vector<MatchRule> rules;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        MatchRule rule;
        rule.pattern = r[c_pat];
        if (!parse_bool(r[c_cs], rule.case_sensitive))
            throw PipelineError(fmt::format("{} line {}: case_sensitive must be true or false", what, table.line_numbers[i]));
        auto layer = trim(r[c_layer]);
        if (layer == "surface")
            rule.layer = MatchLayer::surface;
        else if (layer == "lemma")
            rule.layer = MatchLayer::lemma;
        else
            throw PipelineError(fmt::format("{} line {}: match_layer must be surface or lemma", what, table.line_numbers[i]));
        rule.target = trim(r[c_target]);
        rule.validate();
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::vector<MatchRule> load_rules(const std::filesystem::path& path) {
    return parse_rules_csv(csv::read_file(path), path.string());
}

std::vector<EntityMention> match_rules(const TextDocument& doc, std::span<const MatchRule> rules) {
    doc.validate();
    std::vector<EntityMention> out;
    for (const auto& rule : rules) {
        rule.validate();
        if (rule.layer == MatchLayer::surface)
            match_surface(doc, rule, out);
        else
            match_lemma(doc, rule, out);
    }
    std::stable_sort(out.begin(), out.end(), [](const EntityMention& a, const EntityMention& b) {
        return std::tie(a.char_start, a.char_end) < std::tie(b.char_start, b.char_end);
    });
    return out;
}

std::map<std::string, std::uint64_t> aggregate_mentions(std::span<const EntityMention> mentions) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& m : mentions)
        ++counts[m.key()];
    return counts;
}

// ---------------------------------------------------------------------------
// Triples

void InMemoryTripleSource::add(Triple t) {
    auto key = t.subject;
    by_subject_.emplace(std::move(key), std::move(t));
}

void InMemoryTripleSource::fail_on(std::string subject) {
    failing_.push_back(std::move(subject));
}

std::vector<Triple> InMemoryTripleSource::outgoing(const std::string& subject) {
    ++lookups_;
    if (std::find(failing_.begin(), failing_.end(), subject) != failing_.end())
        throw TransportError(fmt::format("lookup of '{}' failed", subject));
    std::vector<Triple> out;
    auto [b, e] = by_subject_.equal_range(subject);
    for (auto it = b; it != e; ++it)
        out.push_back(it->second);
    return out;
}

namespace {

class NTriplesReader {
public:
    NTriplesReader(std::string_view line, std::size_t lineno) : s_(line), line_(lineno) {}

    std::vector<Triple> parse_statement() {
        skip_ws();
        Triple t;
        auto subj = term();
        if (subj.kind == kg::TermKind::literal)
            fail("subject cannot be a literal");
        t.subject = subj.kind == kg::TermKind::blank ? "_:" + subj.value : subj.value;
        skip_ws();
        auto pred = term();
        if (!pred.is_iri())
            fail("predicate must be an IRI");
        t.predicate = pred.value;
        skip_ws();
        t.object = term();
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '.')
            fail("statement must end with '.'");
        return {t};
    }

private:
    [[noreturn]] void fail(std::string_view why) const {
        throw DataError(fmt::format("N-Triples line {}: {}", line_, why));
    }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t'))
            ++pos_;
    }

    std::string until(char stop) {
        auto end = s_.find(stop, pos_);
        if (end == std::string_view::npos)
            fail(fmt::format("missing '{}'", stop));
        std::string out(s_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return out;
    }

    void append_utf8(std::string& out, unsigned long cp) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }

    kg::RdfTerm term() {
        if (pos_ >= s_.size())
            fail("unexpected end of line");
        char c = s_[pos_];
        if (c == '<') {
            ++pos_;
            return kg::RdfTerm::iri(until('>'));
        }
        if (c == '_' && pos_ + 1 < s_.size() && s_[pos_ + 1] == ':') {
            pos_ += 2;
            auto start = pos_;
            while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t' && s_[pos_] != '.')
                ++pos_;
            return kg::RdfTerm::blank(std::string(s_.substr(start, pos_ - start)));
        }
        if (c == '"') {
            ++pos_;
            std::string value;
            for (;;) {
                if (pos_ >= s_.size())
                    fail("unterminated literal");
                char ch = s_[pos_++];
                if (ch == '"')
                    break;
                if (ch != '\\') {
                    value.push_back(ch);
                    continue;
                }
                if (pos_ >= s_.size())
                    fail("dangling escape");
                char esc = s_[pos_++];
                switch (esc) {
                case 't': value.push_back('\t'); break;
                case 'n': value.push_back('\n'); break;
                case 'r': value.push_back('\r'); break;
                case '"': value.push_back('"'); break;
                case '\\': value.push_back('\\'); break;
                case 'u':
                case 'U': {
                    std::size_t len = esc == 'u' ? 4 : 8;
                    if (pos_ + len > s_.size())
                        fail("short unicode escape");
                    append_utf8(value, std::stoul(std::string(s_.substr(pos_, len)), nullptr, 16));
                    pos_ += len;
                    break;
                }
                default:
                    fail(fmt::format("unknown escape '\\{}'", esc));
                }
            }
            if (pos_ < s_.size() && s_[pos_] == '@') {
                ++pos_;
                auto start = pos_;
                while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-'))
                    ++pos_;
                return kg::RdfTerm::tagged(std::move(value), std::string(s_.substr(start, pos_ - start)));
            }
            if (s_.substr(pos_).starts_with("^^<")) {
                pos_ += 3;
                return kg::RdfTerm::typed(std::move(value), until('>'));
            }
            return kg::RdfTerm::literal(std::move(value));
        }
        fail(fmt::format("unexpected character '{}'", c));
    }

    std::string_view s_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<Triple> parse_ntriples(std::string_view text) {
    std::vector<Triple> out;
    std::size_t lineno = 0;
    while (!text.empty()) {
        ++lineno;
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        auto t = trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        auto parsed = NTriplesReader(t, lineno).parse_statement();
        out.insert(out.end(), parsed.begin(), parsed.end());
    }
    return out;
}

SparqlTripleSource::SparqlTripleSource(std::shared_ptr<kg::SparqlClient> client, const kg::TemplateCatalog& catalog)
    : client_(std::move(client)), describe_(&catalog.get("describe", client_->endpoint().dialect)) {}

std::vector<Triple> SparqlTripleSource::outgoing(const std::string& subject) {
    if (subject.find_first_of("<>\"{}|^`\\ ") != std::string::npos)
        throw PipelineError(fmt::format("'{}' is not a usable IRI", subject));
    auto table = client_->execute(*describe_, {{"subject", "<" + subject + ">"}});
    std::vector<Triple> out;
    for (const auto& row : table.rows) {
        auto p = row.find("p");
        auto o = row.find("o");
        if (p == row.end() || o == row.end())
            continue;
        out.push_back({subject, p->second.value, o->second});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ontology and enrichment

std::optional<std::string> LocalOntology::feature_for(kg::Dialect d, const std::string& predicate) const {
    auto it = property_map.find({d, predicate});
    if (it == property_map.end())
        return std::nullopt;
    return it->second;
}

std::optional<diversity::ActorType> LocalOntology::actor_type_of(kg::Dialect d, std::span<const Triple> triples) const {
    auto tp = type_predicate.find(d);
    auto classes = actor_type_classes.find(d);
    if (tp == type_predicate.end() || classes == actor_type_classes.end())
        return std::nullopt;
    // Fixed precedence keeps the answer stable when a resource has several types.
    for (auto type : {diversity::ActorType::person, diversity::ActorType::organisation,
                      diversity::ActorType::geopolitical_entity}) {
        auto c = classes->second.find(type);
        if (c == classes->second.end())
            continue;
        for (const auto& t : triples)
            if (t.predicate == tp->second && t.object.is_iri() &&
                std::find(c->second.begin(), c->second.end(), t.object.value) != c->second.end())
                return type;
    }
    return std::nullopt;
}

void LocalOntology::validate() const {
    for (const auto& [key, name] : property_map)
        if (name.empty())
            throw ConfigError(fmt::format("ontology: predicate '{}' maps to an empty feature name", key.second));
}

LocalOntology LocalOntology::parse(std::string_view json_text) {
    LocalOntology o;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
        for (const auto& [dname, dnode] : doc.at("dialects").items()) {
            auto d = kg::parse_dialect(dname);
            if (!d)
                throw ConfigError(fmt::format("ontology: unknown dialect '{}'", dname));
            o.type_predicate[*d] = dnode.at("type_predicate").get<std::string>();
            for (const auto& [tname, classes] : dnode.at("actor_types").items()) {
                auto t = diversity::parse_actor_type(tname);
                if (!t)
                    throw ConfigError(fmt::format("ontology: unknown actor type '{}'", tname));
                o.actor_type_classes[*d][*t] = classes.get<std::vector<std::string>>();
            }
            for (const auto& [pred, feature] : dnode.at("properties").items())
                o.property_map[{*d, pred}] = feature.get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("ontology: {}", e.what()));
    }
    o.validate();
    return o;
}

LocalOntology LocalOntology::load(const std::filesystem::path& path) {
    try {
        return parse(csv::read_file(path));
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

EnrichedEntity enrich_entity(const std::string& root_id, TripleSource& source, const LocalOntology& ontology) {
    const auto dialect = source.dialect();
    EnrichedEntity out;
    out.id = root_id;
    const auto root_triples = source.outgoing(root_id);
    out.actor_type = ontology.actor_type_of(dialect, root_triples);

    auto add = [&](std::string name, std::string value, const std::string& from) {
        diversity::Feature f{std::move(name), std::move(value)};
        out.provenance.emplace(f, from);
        out.features.insert(std::move(f));
    };

    std::map<std::string, std::optional<std::vector<Triple>>> linked;
    for (const auto& t : root_triples) {
        auto feature = ontology.feature_for(dialect, t.predicate);
        if (!feature)
            continue;
        add(*feature, t.object.value, root_id);
        if (!t.object.is_iri() || t.object.value == root_id)
            continue;

        auto [it, fresh] = linked.try_emplace(t.object.value);
        if (fresh) {
            try {
                auto triples = source.outgoing(t.object.value);
                if (ontology.actor_type_of(dialect, triples))
                    it->second = std::move(triples);
            } catch (const Error& e) {
                out.warnings.push_back(fmt::format("{}: linked resource {} skipped: {}", root_id, t.object.value, e.what()));
            }
        }
        if (!it->second)
            continue;
        for (const auto& lt : *it->second)
            if (auto lf = ontology.feature_for(dialect, lt.predicate))
                add(*feature + "." + *lf, lt.object.value, t.object.value);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Annotation service

namespace {

// Byte offset of the `units`-th UTF-16 code unit in a UTF-8 string.
std::optional<std::size_t> utf16_to_byte_offset(std::string_view text, std::size_t units) {
    std::size_t pos = 0;
    std::size_t counted = 0;
    while (counted < units) {
        if (pos >= text.size())
            return std::nullopt;
        auto lead = static_cast<unsigned char>(text[pos]);
        std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3 : 4;
        counted += len == 4 ? 2 : 1;
        pos += len;
    }
    if (counted != units || pos > text.size())
        return std::nullopt;
    return pos;
}

std::vector<std::string> split_types(std::string_view s) {
    std::vector<std::string> out;
    while (!s.empty()) {
        auto comma = s.find(',');
        auto part = trim(s.substr(0, comma));
        if (!part.empty())
            out.push_back(part);
        if (comma == std::string_view::npos)
            break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

std::optional<diversity::ActorType> actor_type_from_annotator(const std::vector<std::string>& types) {
    for (const auto& t : types) {
        if (t == "DBpedia:Person" || t == "Schema:Person" || t == "Wikidata:Q5" || t == "Http://xmlns.com/foaf/0.1/Person")
            return diversity::ActorType::person;
    }
    for (const auto& t : types) {
        if (t == "DBpedia:Organisation" || t == "Schema:Organization" || t == "DBpedia:PoliticalParty")
            return diversity::ActorType::organisation;
    }
    for (const auto& t : types) {
        if (t == "DBpedia:Country" || t == "Schema:Country" || t == "DBpedia:PopulatedPlace" ||
            t == "DBpedia:AdministrativeRegion")
            return diversity::ActorType::geopolitical_entity;
    }
    return std::nullopt;
}

} // namespace

std::vector<EntityMention> parse_annotation_response(std::string_view body, const TextDocument& doc) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedResponse(fmt::format("annotation response is not JSON: {}", e.what()));
    }
    if (!j.is_object())
        throw MalformedResponse("annotation response is not a JSON object");
    std::vector<EntityMention> out;
    if (!j.contains("Resources") || j.at("Resources").is_null())
        return out;
    nlohmann::json resources = j.at("Resources");
    if (resources.is_object())
        resources = nlohmann::json::array({resources});
    if (!resources.is_array())
        throw MalformedResponse("'Resources' is neither an array nor an object");
    try {
        for (const auto& r : resources) {
            EntityMention m;
            m.doc_id = doc.doc_id;
            m.provenance = Provenance::annotator;
            m.resolved_id = r.at("@URI").get<std::string>();
            const auto surface = r.at("@surfaceForm").get<std::string>();
            const auto& off = r.at("@offset");
            std::size_t units = off.is_string() ? std::stoull(off.get<std::string>()) : off.get<std::size_t>();
            auto start = utf16_to_byte_offset(doc.text, units);
            if (!start || *start + surface.size() > doc.text.size() ||
                doc.text.compare(*start, surface.size(), surface) != 0)
                throw MalformedResponse(fmt::format("annotation '{}' at offset {} does not match the text", surface, units));
            m.char_start = *start;
            m.char_end = *start + surface.size();
            m.surface = surface;
            if (r.contains("@types") && r.at("@types").is_string())
                m.types = split_types(r.at("@types").get<std::string>());
            out.push_back(std::move(m));
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(fmt::format("annotation resource: {}", e.what()));
    } catch (const std::invalid_argument&) {
        throw MalformedResponse("annotation offset is not a number");
    }
    return out;
}

std::vector<EntityMention> annotate(const TextDocument& doc, http::Transport& transport, const AnnotatorConfig& config) {
    http::Request req;
    req.method = http::Method::post;
    req.url = config.url;
    req.timeout = config.timeout;
    req.headers = {{"Accept", "application/json"}};
    req.content_type = "application/x-www-form-urlencoded";
    req.body = http::form_encode({{"text", doc.text}, {"confidence", fmt::format("{}", config.confidence)}});
    auto resp = transport.send(req);
    if (resp.status != 200)
        throw TransportError(fmt::format("{}: annotation service answered HTTP {}", config.url, resp.status));
    return parse_annotation_response(resp.body, doc);
}

std::vector<EntityMention> retain_actor_mentions(std::span<const EntityMention> mentions,
                                                 const std::map<std::string, EnrichedEntity>& enriched) {
    std::vector<EntityMention> out;
    for (const auto& m : mentions) {
        if (m.provenance == Provenance::rule) {
            out.push_back(m);
            continue;
        }
        std::optional<diversity::ActorType> type;
        if (auto it = enriched.find(m.key()); it != enriched.end())
            type = it->second.actor_type;
        else
            type = actor_type_from_annotator(m.types);
        if (type)
            out.push_back(m);
    }
    return out;
}

} // namespace kgdiv::entities
