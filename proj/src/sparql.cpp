#include "kgdiv/sparql.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>
#include <json.hpp>

namespace kgdiv::kg {

using nlohmann::json;

void RdfTerm::validate() const {
    if (kind != TermKind::literal && (datatype || language))
        throw MalformedResponse("datatype or language tag on a non-literal term");
    if (datatype && language)
        throw MalformedResponse(fmt::format("literal '{}' carries both a datatype and a language tag", value));
}

std::string ResultTable::value(std::size_t row, std::string_view var) const {
    const auto& b = rows.at(row);
    auto it = b.find(std::string(var));
    return it == b.end() ? std::string{} : it->second.value;
}

std::string_view media_type(ResultFormat f) {
    return f == ResultFormat::sparql_json ? "application/sparql-results+json" : "application/sparql-results+xml";
}

namespace {

void check_row_keys(const ResultTable& t, const Binding& row) {
    for (const auto& [k, v] : row)
        if (std::find(t.variables.begin(), t.variables.end(), k) == t.variables.end())
            throw MalformedResponse(fmt::format("binding for undeclared variable '{}'", k));
}

RdfTerm term_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j.contains("value"))
        throw MalformedResponse("binding without type/value");
    const auto& type = j.at("type").get_ref<const std::string&>();
    RdfTerm t;
    t.value = j.at("value").get<std::string>();
    if (type == "uri") {
        t.kind = TermKind::iri;
    } else if (type == "bnode") {
        t.kind = TermKind::blank;
    } else if (type == "literal" || type == "typed-literal") {
        t.kind = TermKind::literal;
        if (j.contains("datatype"))
            t.datatype = j.at("datatype").get<std::string>();
        if (j.contains("xml:lang"))
            t.language = j.at("xml:lang").get<std::string>();
    } else {
        throw MalformedResponse(fmt::format("unknown binding kind '{}'", type));
    }
    t.validate();
    return t;
}

ResultTable parse_json(std::string_view body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::parse_error& e) {
        throw MalformedResponse(fmt::format("invalid SPARQL JSON: {}", e.what()));
    }
    try {
        ResultTable t;
        const auto& head = doc.at("head");
        if (head.contains("vars"))
            for (const auto& v : head.at("vars"))
                t.variables.push_back(v.get<std::string>());
        for (const auto& b : doc.at("results").at("bindings")) {
            Binding row;
            for (const auto& [name, val] : b.items())
                row.emplace(name, term_from_json(val));
            check_row_keys(t, row);
            t.rows.push_back(std::move(row));
        }
        return t;
    } catch (const json::exception& e) {
        throw MalformedResponse(fmt::format("unexpected SPARQL JSON structure: {}", e.what()));
    }
}

namespace pt = boost::property_tree;

ResultTable parse_xml(std::string_view body) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(body)};
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw MalformedResponse(fmt::format("invalid SPARQL XML: {}", e.what()));
    }
    auto sparql = tree.get_child_optional("sparql");
    if (!sparql)
        throw MalformedResponse("SPARQL XML without <sparql> root");
    ResultTable t;
    if (auto head = sparql->get_child_optional("head"))
        for (const auto& [tag, node] : *head)
            if (tag == "variable")
                t.variables.push_back(node.get<std::string>("<xmlattr>.name"));
    auto results = sparql->get_child_optional("results");
    if (!results)
        throw MalformedResponse("SPARQL XML without <results>");
    for (const auto& [tag, result] : *results) {
        if (tag != "result")
            continue;
        Binding row;
        for (const auto& [btag, binding] : result) {
            if (btag != "binding")
                continue;
            auto name = binding.get_optional<std::string>("<xmlattr>.name");
            if (!name)
                throw MalformedResponse("binding without a name attribute");
            RdfTerm term;
            bool found = false;
            for (const auto& [ktag, knode] : binding) {
                if (ktag == "<xmlattr>")
                    continue;
                found = true;
                term.value = knode.get_value<std::string>();
                if (ktag == "uri") {
                    term.kind = TermKind::iri;
                } else if (ktag == "bnode") {
                    term.kind = TermKind::blank;
                } else if (ktag == "literal") {
                    term.kind = TermKind::literal;
                    if (auto dt = knode.get_optional<std::string>("<xmlattr>.datatype"))
                        term.datatype = *dt;
                    if (auto lang = knode.get_optional<std::string>("<xmlattr>.xml:lang"))
                        term.language = *lang;
                } else {
                    throw MalformedResponse(fmt::format("unknown binding kind '{}'", ktag));
                }
                break;
            }
            if (!found)
                throw MalformedResponse(fmt::format("empty binding for '{}'", *name));
            term.validate();
            row.emplace(*name, std::move(term));
        }
        check_row_keys(t, row);
        t.rows.push_back(std::move(row));
    }
    return t;
}

json term_to_json(const RdfTerm& t) {
    json j;
    switch (t.kind) {
    case TermKind::iri:
        j["type"] = "uri";
        break;
    case TermKind::blank:
        j["type"] = "bnode";
        break;
    case TermKind::literal:
        j["type"] = "literal";
        if (t.datatype)
            j["datatype"] = *t.datatype;
        if (t.language)
            j["xml:lang"] = *t.language;
        break;
    }
    j["value"] = t.value;
    return j;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out.push_back(c);
        }
    }
    return out;
}

} // namespace

ResultTable parse_results(std::string_view body, ResultFormat format) {
    return format == ResultFormat::sparql_json ? parse_json(body) : parse_xml(body);
}

std::string serialize_results(const ResultTable& table, ResultFormat format) {
    if (format == ResultFormat::sparql_json) {
        json doc;
        doc["head"]["vars"] = table.variables;
        doc["results"]["bindings"] = json::array();
        for (const auto& row : table.rows) {
            json b = json::object();
            for (const auto& [name, term] : row)
                b[name] = term_to_json(term);
            doc["results"]["bindings"].push_back(std::move(b));
        }
        return doc.dump();
    }
    std::string out = "<?xml version=\"1.0\"?>\n<sparql xmlns=\"http://www.w3.org/2005/sparql-results#\">\n<head>\n";
    for (const auto& v : table.variables)
        out += fmt::format("  <variable name=\"{}\"/>\n", xml_escape(v));
    out += "</head>\n<results>\n";
    for (const auto& row : table.rows) {
        out += "  <result>\n";
        for (const auto& [name, t] : row) {
            out += fmt::format("    <binding name=\"{}\">", xml_escape(name));
            switch (t.kind) {
            case TermKind::iri:
                out += fmt::format("<uri>{}</uri>", xml_escape(t.value));
                break;
            case TermKind::blank:
                out += fmt::format("<bnode>{}</bnode>", xml_escape(t.value));
                break;
            case TermKind::literal:
                out += "<literal";
                if (t.datatype)
                    out += fmt::format(" datatype=\"{}\"", xml_escape(*t.datatype));
                if (t.language)
                    out += fmt::format(" xml:lang=\"{}\"", xml_escape(*t.language));
                out += fmt::format(">{}</literal>", xml_escape(t.value));
                break;
            }
            out += "</binding>\n";
        }
        out += "  </result>\n";
    }
    out += "</results>\n</sparql>\n";
    return out;
}

} // namespace kgdiv::kg
