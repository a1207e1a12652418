#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgdiv/diversity.hpp"
#include "kgdiv/kg_clients.hpp"
#include "kgdiv/sparql.hpp"

namespace kgdiv::entities {

class PipelineError : public Error {
public:
    using Error::Error;
};

struct Token {
    std::string surface;
    std::string lemma;
    std::size_t char_start = 0; // byte offsets into TextDocument::text
    std::size_t char_end = 0;
};

struct TextDocument {
    std::string doc_id;
    std::string text;
    std::optional<std::vector<Token>> tokens; // the lemma layer, supplied by the caller

    // Token spans inside the text, ordered and non-overlapping.
    void validate() const;
};

enum class MatchLayer { surface, lemma };

// target is a resource IRI, or "unnamed:<label>" for a category without a
// resource (e.g. "unnamed:refugee").
struct MatchRule {
    std::string pattern;
    bool case_sensitive = true;
    MatchLayer layer = MatchLayer::surface;
    std::string target;

    bool is_unnamed() const { return target.starts_with("unnamed:"); }
    void validate() const;
};

enum class Provenance { rule, annotator };

struct EntityMention {
    std::string doc_id;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::string surface;
    std::optional<std::string> resolved_id;
    std::string category; // unnamed-category label for rule targets without a resource
    Provenance provenance = Provenance::rule;
    std::vector<std::string> types; // annotator-reported types, if any

    // Counting key: the resolved id, or the category label.
    const std::string& key() const { return resolved_id ? *resolved_id : category; }
};

// Rule file: CSV with columns pattern,case_sensitive,match_layer,target.
std::vector<MatchRule> parse_rules_csv(std::string_view text, std::string_view what = "rules");
std::vector<MatchRule> load_rules(const std::filesystem::path& path);

// Per rule, leftmost-longest non-overlapping matches aligned to word
// boundaries (surface layer) or whole tokens (lemma layer). Case-insensitive
// rules compare ASCII case-folded text. Lemma rules need doc.tokens.
std::vector<EntityMention> match_rules(const TextDocument& doc, std::span<const MatchRule> rules);

std::map<std::string, std::uint64_t> aggregate_mentions(std::span<const EntityMention> mentions);

// ---------------------------------------------------------------------------
// Enrichment

struct Triple {
    std::string subject;
    std::string predicate;
    kg::RdfTerm object;
};

class TripleSource {
public:
    virtual ~TripleSource() = default;
    // Outgoing triples of `subject`. Throws on retrieval failure.
    virtual std::vector<Triple> outgoing(const std::string& subject) = 0;
    virtual kg::Dialect dialect() const = 0;
};

// Triples held in memory, e.g. read from an N-Triples file.
class InMemoryTripleSource final : public TripleSource {
public:
    explicit InMemoryTripleSource(kg::Dialect dialect) : dialect_(dialect) {}
    void add(Triple t);
    // Marks a subject whose lookup should fail (to exercise degraded paths).
    void fail_on(std::string subject);
    std::vector<Triple> outgoing(const std::string& subject) override;
    kg::Dialect dialect() const override { return dialect_; }
    std::size_t lookups() const { return lookups_; }

private:
    kg::Dialect dialect_;
    std::multimap<std::string, Triple> by_subject_;
    std::vector<std::string> failing_;
    std::size_t lookups_ = 0;
};

// Parses N-Triples (IRIs, blank nodes, literals with language or datatype).
std::vector<Triple> parse_ntriples(std::string_view text);

// Looks resources up through a SPARQL endpoint with the catalog's
// "describe" template (binds {{subject}}).
class SparqlTripleSource final : public TripleSource {
public:
    SparqlTripleSource(std::shared_ptr<kg::SparqlClient> client, const kg::TemplateCatalog& catalog);
    std::vector<Triple> outgoing(const std::string& subject) override;
    kg::Dialect dialect() const override { return client_->endpoint().dialect; }

private:
    std::shared_ptr<kg::SparqlClient> client_;
    const kg::QueryTemplate* describe_;
};

struct LocalOntology {
    // (dialect, predicate IRI) -> feature name
    std::map<std::pair<kg::Dialect, std::string>, std::string> property_map;
    // dialect -> actor type -> class IRIs
    std::map<kg::Dialect, std::map<diversity::ActorType, std::vector<std::string>>> actor_type_classes;
    // dialect -> predicate that carries class membership (rdf:type, wdt:P31)
    std::map<kg::Dialect, std::string> type_predicate;

    std::optional<std::string> feature_for(kg::Dialect d, const std::string& predicate) const;
    std::optional<diversity::ActorType> actor_type_of(kg::Dialect d, std::span<const Triple> triples) const;
    void validate() const;

    static LocalOntology parse(std::string_view json_text);
    static LocalOntology load(const std::filesystem::path& path);
};

struct EnrichedEntity {
    std::string id;
    std::optional<diversity::ActorType> actor_type;
    diversity::FeatureSet features;
    std::map<diversity::Feature, std::string> provenance; // feature -> resource it came from
    std::vector<std::string> warnings;
};

// Maps the root's predicates to features, then expands exactly one hop: an
// object that is itself a person, organisation or geopolitical entity has its
// own mapped predicates added under "<linking feature>.<feature>".
// Root retrieval failures propagate; linked-resource failures only warn.
EnrichedEntity enrich_entity(const std::string& root_id, TripleSource& source, const LocalOntology& ontology);

// ---------------------------------------------------------------------------
// Annotation service (DBpedia Spotlight response format)

struct AnnotatorConfig {
    std::string url; // e.g. https://api.dbpedia-spotlight.org/en/annotate
    double confidence = 0.5;
    std::chrono::milliseconds timeout{30000};
};

// Offsets in the response count UTF-16 code units (Spotlight is a Java
// service); they are converted to byte offsets into doc.text.
std::vector<EntityMention> parse_annotation_response(std::string_view body, const TextDocument& doc);

// Throws TransportError when the service is unreachable or answers with an
// error status, MalformedResponse when the body cannot be parsed.
std::vector<EntityMention> annotate(const TextDocument& doc, http::Transport& transport, const AnnotatorConfig& config);

// Drops annotator mentions whose resource is not one of the three actor
// types; rule mentions pass through.
std::vector<EntityMention> retain_actor_mentions(std::span<const EntityMention> mentions,
                                                 const std::map<std::string, EnrichedEntity>& enriched);

} // namespace kgdiv::entities
