#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgdiv/errors.hpp"

namespace kgdiv::kg {

enum class TermKind { iri, literal, blank };

// datatype and language only ever appear on literals, and never together.
struct RdfTerm {
    TermKind kind = TermKind::literal;
    std::string value;
    std::optional<std::string> datatype;
    std::optional<std::string> language;

    static RdfTerm iri(std::string v) { return {TermKind::iri, std::move(v), {}, {}}; }
    static RdfTerm blank(std::string v) { return {TermKind::blank, std::move(v), {}, {}}; }
    static RdfTerm literal(std::string v) { return {TermKind::literal, std::move(v), {}, {}}; }
    static RdfTerm typed(std::string v, std::string dt) { return {TermKind::literal, std::move(v), std::move(dt), {}}; }
    static RdfTerm tagged(std::string v, std::string lang) { return {TermKind::literal, std::move(v), {}, std::move(lang)}; }

    bool is_iri() const { return kind == TermKind::iri; }
    void validate() const; // throws MalformedResponse

    auto operator<=>(const RdfTerm&) const = default;
};

using Binding = std::map<std::string, RdfTerm>;

struct ResultTable {
    std::vector<std::string> variables;
    std::vector<Binding> rows; // unbound variables are absent from the row

    // Value of `var` in `row`, or "" when unbound.
    std::string value(std::size_t row, std::string_view var) const;
    bool operator==(const ResultTable&) const = default;
};

enum class ResultFormat { sparql_json, sparql_xml };

std::string_view media_type(ResultFormat f);

// Throws MalformedResponse on documents that do not follow the W3C SPARQL
// query results formats (JSON or XML), including unknown binding kinds.
ResultTable parse_results(std::string_view body, ResultFormat format);

std::string serialize_results(const ResultTable& table, ResultFormat format);

} // namespace kgdiv::kg
