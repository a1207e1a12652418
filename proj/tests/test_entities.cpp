#include <doctest.h>

#include <functional>

#include "kgdiv/csv.hpp"
#include "kgdiv/entities.hpp"
#include "support.hpp"

using namespace kgdiv;
using namespace kgdiv::entities;
using kgdiv::testing::fixture;
using kgdiv::testing::slurp;

namespace {

const std::string kRdfType = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
const std::string kDbo = "http://dbpedia.org/ontology/";

MatchRule rule(std::string pattern, bool cs, std::string target = "http://example.org/X",
               MatchLayer layer = MatchLayer::surface) {
    return {std::move(pattern), cs, layer, std::move(target)};
}

TextDocument doc(std::string text) {
    return {"d", std::move(text), std::nullopt};
}

LocalOntology bundled_ontology() {
    return LocalOntology::load(std::filesystem::path(KGDIV_DATA_DIR) / "ontology.json");
}

void add(InMemoryTripleSource& src, const std::string& s, const std::string& p, kg::RdfTerm o) {
    src.add({s, p, std::move(o)});
}

class ScriptedTransport final : public http::Transport {
public:
    std::function<http::Response(const http::Request&)> fn;
    std::vector<http::Request> seen;
    http::Response send(const http::Request& r) override {
        seen.push_back(r);
        return fn(r);
    }
};

} // namespace

TEST_SUITE("entities") {

TEST_CASE("surface rule matches literal substring") {
    std::vector<MatchRule> rules{rule("N-VA", true)};
    auto m = match_rules(doc("N-VA wint"), rules);
    REQUIRE(m.size() == 1);
    CHECK(m[0].char_start == 0);
    CHECK(m[0].char_end == 4);
    CHECK(m[0].surface == "N-VA");
    CHECK(m[0].provenance == Provenance::rule);
    CHECK(m[0].resolved_id == "http://example.org/X");

    CHECK(match_rules(doc("n-va wint"), rules).empty());

    std::vector<MatchRule> ci{rule("N-VA", false)};
    CHECK(match_rules(doc("n-va wint"), ci).size() == 1);
}

TEST_CASE("surface rule respects word boundaries") {
    std::vector<MatchRule> rules{rule("refugee", false, "unnamed:refugee")};
    CHECK(match_rules(doc("refugees arrived"), rules).empty());
    auto m = match_rules(doc("A Refugee, another refugee."), rules);
    REQUIRE(m.size() == 2);
    CHECK(m[0].category == "unnamed:refugee");
    CHECK_FALSE(m[0].resolved_id);
    CHECK(m[0].key() == "unnamed:refugee");
}

TEST_CASE("lemma rule matches hand lemmatized tokens") {
    TextDocument d{"d", "refugees arrived", std::vector<Token>{{"refugees", "refugee", 0, 8}, {"arrived", "arrive", 9, 16}}};
    std::vector<MatchRule> rules{rule("refugee", true, "unnamed:refugee", MatchLayer::lemma)};
    auto m = match_rules(d, rules);
    REQUIRE(m.size() == 1);
    CHECK(m[0].char_start == 0);
    CHECK(m[0].char_end == 8);
    CHECK(m[0].surface == "refugees");
    CHECK(m[0].key() == "unnamed:refugee");

    CHECK_THROWS_AS(match_rules(doc("refugees arrived"), rules), PipelineError);
}

TEST_CASE("multi-token lemma pattern") {
    TextDocument d{"d", "the prime ministers met",
                   std::vector<Token>{{"the", "the", 0, 3}, {"prime", "prime", 4, 9}, {"ministers", "minister", 10, 19},
                                      {"met", "meet", 20, 23}}};
    std::vector<MatchRule> rules{rule("prime minister", true, "unnamed:pm", MatchLayer::lemma)};
    auto m = match_rules(d, rules);
    REQUIRE(m.size() == 1);
    CHECK(m[0].char_start == 4);
    CHECK(m[0].char_end == 19);
}

TEST_CASE("rule validation") {
    CHECK_THROWS_AS(rule("", true).validate(), PipelineError);
    CHECK_THROWS(parse_rules_csv("pattern,case_sensitive,match_layer,target\nx,maybe,surface,http://e/x\n"));
    CHECK_THROWS(parse_rules_csv("pattern,case_sensitive,match_layer,target\nx,true,token,http://e/x\n"));
    auto rules = parse_rules_csv("pattern,case_sensitive,match_layer,target\nx,no,lemma,unnamed:x\n");
    REQUIRE(rules.size() == 1);
    CHECK_FALSE(rules[0].case_sensitive);
    CHECK(rules[0].layer == MatchLayer::lemma);
}

TEST_CASE("aggregate mentions") {
    CHECK(aggregate_mentions({}).empty());
    std::vector<EntityMention> ms;
    for (int i = 0; i < 3; ++i)
        ms.push_back({"d", 0, 1, "a", "A", "", Provenance::rule, {}});
    ms.push_back({"d", 0, 1, "b", "B", "", Provenance::annotator, {}});
    ms.push_back({"d", 0, 1, "a", "A", "", Provenance::annotator, {}});
    auto counts = aggregate_mentions(ms);
    CHECK(counts.at("A") == 4);
    CHECK(counts.at("B") == 1);
}

TEST_CASE("property: spans stay in bounds and never overlap per rule") {
    testing::Rng rng(31);
    const std::string alphabet = "aAbB -";
    for (int it = 0; it < 400; ++it) {
        std::string text, pattern;
        int n = testing::uniform_int(rng, 0, 40), k = testing::uniform_int(rng, 1, 3);
        for (int i = 0; i < n; ++i)
            text += alphabet[testing::uniform_int(rng, 0, 5)];
        for (int i = 0; i < k; ++i)
            pattern += alphabet[testing::uniform_int(rng, 0, 3)];
        std::vector<MatchRule> rules{rule(pattern, testing::coin(rng))};
        auto ms = match_rules(doc(text), rules);
        for (std::size_t i = 0; i < ms.size(); ++i) {
            CHECK(ms[i].char_start < ms[i].char_end);
            CHECK(ms[i].char_end <= text.size());
            if (i > 0)
                CHECK(ms[i - 1].char_end <= ms[i].char_start);
        }
    }
}

TEST_CASE("property: case-insensitive matching covers case-sensitive matches") {
    testing::Rng rng(32);
    const std::string alphabet = "aAbB ";
    auto fold = [](std::string s) {
        for (auto& c : s)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    for (int it = 0; it < 600; ++it) {
        std::string text, pattern;
        int n = testing::uniform_int(rng, 0, 40), k = testing::uniform_int(rng, 1, 4);
        for (int i = 0; i < n; ++i)
            text += alphabet[testing::uniform_int(rng, 0, 4)];
        for (int i = 0; i < k; ++i)
            pattern += alphabet[testing::uniform_int(rng, 0, 3)];
        std::vector<MatchRule> cs{rule(pattern, true)}, ci{rule(pattern, false)};
        auto a = match_rules(doc(text), cs);
        auto b = match_rules(doc(text), ci);

        // A folded pattern that overlaps itself ("aa" in "aaa") can have a
        // case-sensitive hit swallowed by an earlier case-insensitive one;
        // then the span is only covered, not reproduced.
        auto f = fold(pattern);
        bool self_overlapping = false;
        for (std::size_t s = 1; s < f.size(); ++s)
            if (f.compare(s, std::string::npos, f, 0, f.size() - s) == 0)
                self_overlapping = true;

        for (const auto& m : a) {
            bool exact = false, overlapped = false;
            for (const auto& o : b) {
                exact = exact || (o.char_start == m.char_start && o.char_end == m.char_end);
                overlapped = overlapped || (o.char_start < m.char_end && m.char_start < o.char_end);
            }
            if (self_overlapping)
                CHECK(overlapped);
            else
                CHECK(exact);
        }
        CHECK(b.size() >= (self_overlapping ? 0u : a.size()));
    }
}

TEST_CASE("n-triples parsing") {
    auto ts = parse_ntriples(
        "# comment\n"
        "<http://e/s> <http://e/p> \"caf\\u00E9 \\\"x\\\"\"@fr .\n"
        "_:b1 <http://e/p> \"12\"^^<http://www.w3.org/2001/XMLSchema#integer> .\n"
        "\n"
        "<http://e/s> <http://e/q> <http://e/o> .\n");
    REQUIRE(ts.size() == 3);
    CHECK(ts[0].object.value == "caf\xC3\xA9 \"x\"");
    CHECK(ts[0].object.language == "fr");
    CHECK(ts[1].subject == "_:b1");
    CHECK(ts[1].object.datatype == "http://www.w3.org/2001/XMLSchema#integer");
    CHECK(ts[2].object.is_iri());

    CHECK_THROWS_AS(parse_ntriples("<http://e/s> <http://e/p> <http://e/o>\n"), DataError);
    CHECK_THROWS_AS(parse_ntriples("<http://e/s> <http://e/p> \"open .\n"), DataError);
}

TEST_CASE("enrichment maps predicates and expands one hop") {
    auto onto = bundled_ontology();
    InMemoryTripleSource src(kg::Dialect::en_dbpedia);
    add(src, "X", kRdfType, kg::RdfTerm::iri(kDbo + "Person"));
    add(src, "X", kDbo + "party", kg::RdfTerm::iri("Y"));
    add(src, "X", "http://example.org/unmapped", kg::RdfTerm::literal("ignored"));
    add(src, "Y", kRdfType, kg::RdfTerm::iri(kDbo + "PoliticalParty"));
    add(src, "Y", kDbo + "ideology", kg::RdfTerm::iri("Z"));

    auto e = enrich_entity("X", src, onto);
    CHECK(e.actor_type == diversity::ActorType::person);
    CHECK(e.features == diversity::FeatureSet{{"party", "Y"}, {"party.ideology", "Z"}});
    CHECK(e.provenance.at({"party.ideology", "Z"}) == "Y");
    CHECK(e.warnings.empty());
}

TEST_CASE("enrichment of a country link with a custom property") {
    auto onto = bundled_ontology();
    onto.property_map[{kg::Dialect::en_dbpedia, "http://example.org/governmentType"}] = "government-type";
    InMemoryTripleSource src(kg::Dialect::en_dbpedia);
    add(src, "X", kDbo + "country", kg::RdfTerm::iri("C"));
    add(src, "C", kRdfType, kg::RdfTerm::iri(kDbo + "Country"));
    add(src, "C", "http://example.org/governmentType", kg::RdfTerm::literal("G"));
    auto e = enrich_entity("X", src, onto);
    CHECK(e.features == diversity::FeatureSet{{"country", "C"}, {"country.government-type", "G"}});
}

TEST_CASE("enrichment with only unmapped predicates is empty") {
    InMemoryTripleSource src(kg::Dialect::en_dbpedia);
    add(src, "X", "http://example.org/p", kg::RdfTerm::iri("Y"));
    CHECK(enrich_entity("X", src, bundled_ontology()).features.empty());
}

TEST_CASE("enrichment never goes past one hop") {
    InMemoryTripleSource src(kg::Dialect::en_dbpedia);
    const std::vector<std::string> chain{"H0", "H1", "H2", "H3"};
    for (std::size_t i = 0; i < chain.size(); ++i) {
        add(src, chain[i], kRdfType, kg::RdfTerm::iri(kDbo + "Organisation"));
        add(src, chain[i], kDbo + "ideology", kg::RdfTerm::literal("i" + std::to_string(i)));
        if (i + 1 < chain.size())
            add(src, chain[i], kDbo + "party", kg::RdfTerm::iri(chain[i + 1]));
    }
    auto e = enrich_entity("H0", src, bundled_ontology());
    CHECK(e.features == diversity::FeatureSet{{"ideology", "i0"},
                                              {"party", "H1"},
                                              {"party.ideology", "i1"},
                                              {"party.party", "H2"}});
    for (const auto& [name, value] : e.features) {
        CHECK(value != "i2");
        CHECK(value != "H3");
    }
}

TEST_CASE("linked non-actors are not expanded") {
    InMemoryTripleSource src(kg::Dialect::en_dbpedia);
    add(src, "X", kDbo + "occupation", kg::RdfTerm::iri("Lawyer"));
    add(src, "Lawyer", kDbo + "ideology", kg::RdfTerm::literal("none"));
    auto e = enrich_entity("X", src, bundled_ontology());
    CHECK(e.features == diversity::FeatureSet{{"occupation", "Lawyer"}});
}

TEST_CASE("linked failures degrade, root failures propagate") {
    InMemoryTripleSource src(kg::Dialect::en_dbpedia);
    add(src, "X", kDbo + "party", kg::RdfTerm::iri("Y"));
    src.fail_on("Y");
    auto e = enrich_entity("X", src, bundled_ontology());
    CHECK(e.features == diversity::FeatureSet{{"party", "Y"}});
    CHECK(e.warnings.size() == 1);

    src.fail_on("X");
    CHECK_THROWS_AS(enrich_entity("X", src, bundled_ontology()), TransportError);
}

TEST_CASE("ontology parsing rejects bad documents") {
    CHECK_THROWS(LocalOntology::parse("{}"));
    CHECK_THROWS(LocalOntology::parse(R"({"dialects":{"xx":{}}})"));
    CHECK_THROWS(LocalOntology::parse("not json"));
}

TEST_CASE("spotlight response offsets become byte offsets") {
    TextDocument d{"d", slurp(fixture("entities/spotlight_text.txt")), std::nullopt};
    auto ms = parse_annotation_response(slurp(fixture("entities/spotlight_response.json")), d);
    auto expected = csv::read_table(fixture("entities/spotlight_expected_spans.csv"));
    REQUIRE(ms.size() == expected.rows.size());
    for (std::size_t i = 0; i < ms.size(); ++i) {
        CHECK(ms[i].surface == expected.rows[i][0]);
        CHECK(ms[i].char_start == std::stoul(expected.rows[i][1]));
        CHECK(ms[i].char_end == std::stoul(expected.rows[i][2]));
        CHECK(d.text.substr(ms[i].char_start, ms[i].char_end - ms[i].char_start) == ms[i].surface);
        CHECK(ms[i].provenance == Provenance::annotator);
    }
    CHECK(ms[0].resolved_id == "http://dbpedia.org/resource/Elio_Di_Rupo");
}

TEST_CASE("spotlight edge responses") {
    TextDocument d = doc("Nothing here.");
    CHECK(parse_annotation_response(R"({"@text":"Nothing here."})", d).empty());
    auto body = slurp(fixture("entities/spotlight_response.json"));
    TextDocument full{"d", slurp(fixture("entities/spotlight_text.txt")), std::nullopt};
    CHECK_THROWS_AS(parse_annotation_response(body.substr(0, body.size() / 2), full), MalformedResponse);
    CHECK_THROWS_AS(
        parse_annotation_response(R"({"Resources":[{"@URI":"http://e/x","@surfaceForm":"Other","@offset":"0"}]})", d),
        MalformedResponse);
}

TEST_CASE("annotate posts the text and maps failures") {
    ScriptedTransport t;
    AnnotatorConfig cfg{"http://spotlight.test/annotate", 0.4, std::chrono::milliseconds(1000)};
    TextDocument d{"d", slurp(fixture("entities/spotlight_text.txt")), std::nullopt};

    t.fn = [&](const http::Request&) { return http::Response{200, slurp(fixture("entities/spotlight_response.json")), "application/json"}; };
    auto ms = annotate(d, t, cfg);
    CHECK(ms.size() == 4);
    REQUIRE(t.seen.size() == 1);
    CHECK(t.seen[0].method == http::Method::post);
    auto form = http::parse_form(t.seen[0].body);
    CHECK(form.at("text") == d.text);
    CHECK(form.at("confidence") == "0.4");

    t.fn = [](const http::Request&) { return http::Response{503, "busy", "text/plain"}; };
    CHECK_THROWS_AS(annotate(d, t, cfg), TransportError);
    t.fn = [](const http::Request&) -> http::Response { throw TransportError("refused"); };
    CHECK_THROWS_AS(annotate(d, t, cfg), TransportError);
    t.fn = [](const http::Request&) { return http::Response{200, "{\"Resources\": [", "application/json"}; };
    CHECK_THROWS_AS(annotate(d, t, cfg), MalformedResponse);
}

TEST_CASE("only actor mentions survive the type filter") {
    std::vector<EntityMention> ms{
        {"d", 0, 1, "a", "http://e/person", "", Provenance::annotator, {"DBpedia:Person"}},
        {"d", 2, 3, "b", "http://e/film", "", Provenance::annotator, {"DBpedia:Film"}},
        {"d", 4, 5, "c", "http://e/enriched", "", Provenance::annotator, {}},
        {"d", 6, 7, "r", std::nullopt, "unnamed:r", Provenance::rule, {}},
    };
    std::map<std::string, EnrichedEntity> enriched;
    enriched["http://e/enriched"].actor_type = diversity::ActorType::geopolitical_entity;
    enriched["http://e/person"].actor_type = std::nullopt;
    auto kept = retain_actor_mentions(ms, enriched);
    std::vector<std::string> keys;
    for (const auto& m : kept)
        keys.push_back(m.key());
    // Enrichment knows better than the annotator's type list.
    CHECK(keys == std::vector<std::string>{"http://e/enriched", "unnamed:r"});
}

} // TEST_SUITE
