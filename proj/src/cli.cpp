#include "kgdiv/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "kgdiv/csv.hpp"
#include "kgdiv/report.hpp"

namespace kgdiv::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

Date system_today() {
    return Date{std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now())};
}

std::vector<Date> parse_schedule(const std::string& text) {
    std::vector<Date> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
        if (item.size() == 4 && std::all_of(item.begin(), item.end(), [](unsigned char c) { return std::isdigit(c); }))
            out.push_back(january_first(std::stoi(item)));
        else if (auto d = parse_iso_date(item))
            out.push_back(*d);
        else
            throw ConfigError(fmt::format("schedule entry '{}' is neither a year nor YYYY-MM-DD", item));
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    if (out.empty())
        throw ConfigError("the audit schedule is empty");
    return out;
}

std::map<std::string, Date> load_career_end(const fs::path& path) {
    auto table = csv::read_table(path);
    table.require_columns({"politician_id", "career_end"}, path.string());
    auto c_id = table.column("politician_id");
    auto c_end = table.column("career_end");
    std::map<std::string, Date> out;
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        out[table.rows[i][c_id]] = require_iso_date(
            table.rows[i][c_end], fmt::format("{} line {} career_end", path.string(), table.line_numbers[i]));
    return out;
}

void write_outputs(const std::vector<std::pair<fs::path, std::string>>& files) {
    std::vector<fs::path> written;
    try {
        for (const auto& [path, content] : files) {
            fs::create_directories(path.parent_path());
            csv::write_file_atomic(path, content);
            written.push_back(path);
        }
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written)
            fs::remove(p, ec);
        throw;
    }
}

// ---------------------------------------------------------------------------
// fetch

struct FetchArgs {
    std::string source;
    std::string fixture_dir;
    std::string out_dir;
};

int cmd_fetch(const RunConfig& cfg, const FetchArgs& args, std::ostream& out, std::ostream& err) {
    const auto dialect = *kg::parse_dialect(args.source);
    const auto catalog = kg::TemplateCatalog::load(cfg.templates);
    auto endpoint = cfg.endpoints.at(dialect);

    std::shared_ptr<http::Transport> transport;
    std::string retrieved_at;
    if (!args.fixture_dir.empty()) {
        auto service = std::make_shared<const kg::FixtureService>(args.fixture_dir);
        transport = std::make_shared<kg::FixtureTransport>(service, dialect);
        retrieved_at = service->retrieved_at().value_or(to_iso(system_today()));
        require_iso_date(retrieved_at, "fixture manifest retrieved_at");
        // Recorded results answer instantly; do not throttle them like the live service.
        endpoint.url = "fixture:" + fs::absolute(args.fixture_dir).string() + "/" + args.source;
        endpoint.max_requests_per_second = 1e6;
        endpoint.backoff_base = std::chrono::milliseconds(0);
    } else {
        transport = std::make_shared<http::HttpTransport>();
        retrieved_at = to_iso(system_today());
    }

    kg::SparqlClient client(endpoint, transport);
    auto politicians = kg::fetch_politicians(client, catalog, retrieved_at);
    auto parties = kg::fetch_parties(client, catalog, retrieved_at);

    const fs::path dir = fs::path(args.out_dir.empty() ? (cfg.output_dir / "snapshot").string() : args.out_dir) / args.source;
    write_outputs({{dir / "politicians.csv", kg::format_politicians_csv(politicians)},
                   {dir / "parties.csv", kg::format_parties_csv(parties)}});
    const auto& stats = client.stats();
    err << fmt::format("{}: {} politician rows, {} party rows ({} requests, {} retries)\n", args.source,
                       politicians.size(), parties.size(), stats.requests, stats.retries);
    out << dir.string() << "\n";
    return kSuccess;
}

// ---------------------------------------------------------------------------
// audit

struct AuditArgs {
    std::string snapshot;
    std::string baseline;
    std::string map;
    std::string parties;
    std::string schedule;
    std::string policy;
    std::string body;
    std::string out_dir;
    std::string today;
    std::string career_end;
    std::optional<double> max_unmapped;
};

fs::path pick(const std::string& flag, const std::optional<fs::path>& configured, std::string_view what) {
    if (!flag.empty())
        return flag;
    if (configured)
        return *configured;
    throw ConfigError(fmt::format("no {} given (flag or config)", what));
}

std::string format_findings(const std::vector<audit::Finding>& findings) {
    std::vector<csv::Row> rows;
    for (const auto& f : findings)
        rows.push_back({f.kind, f.source, f.subject, f.detail});
    return csv::format_table({"kind", "source", "subject", "detail"}, rows);
}

int cmd_audit(const RunConfig& cfg, const AuditArgs& args, std::ostream& out, std::ostream& err) {
    const auto map_path = pick(args.map, cfg.normalization_map, "normalization map");
    fs::path parties_path;
    if (!args.parties.empty())
        parties_path = args.parties;
    else if (cfg.party_classes)
        parties_path = *cfg.party_classes;
    else
        parties_path = map_path.parent_path() / "party_classes.csv";
    const auto baseline_path = pick(args.baseline, cfg.baselines, "baseline file");
    if (!fs::exists(baseline_path))
        throw ConfigError(fmt::format("baseline file '{}' does not exist", baseline_path.string()));

    const auto map = audit::NormalizationMap::load(map_path, parties_path);
    std::map<std::string, audit::BaselineTable> baselines;
    try {
        baselines = audit::load_baselines(baseline_path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    std::string body = !args.body.empty() ? args.body : cfg.body.value_or("");
    if (body.empty()) {
        if (baselines.size() != 1)
            throw ConfigError(fmt::format("{} holds {} bodies; pick one with --body", baseline_path.string(),
                                          baselines.size()));
        body = baselines.begin()->first;
    }
    auto table = baselines.find(body);
    if (table == baselines.end())
        throw ConfigError(fmt::format("{} has no rows for body '{}'", baseline_path.string(), body));

    audit::AuditOptions options;
    options.policy = cfg.baseline_policy;
    if (!args.policy.empty())
        options.policy = *audit::parse_baseline_policy(args.policy);
    if (!args.today.empty()) {
        auto d = parse_iso_date(args.today);
        if (!d)
            throw ConfigError(fmt::format("--today '{}' is not YYYY-MM-DD", args.today));
        options.today = d;
    }
    if (!args.career_end.empty())
        options.career_end = load_career_end(args.career_end);
    else if (cfg.career_end)
        options.career_end = load_career_end(*cfg.career_end);
    auto schedule = !args.schedule.empty() ? parse_schedule(args.schedule)
                    : !cfg.schedule.empty() ? cfg.schedule
                                            : audit::default_schedule();
    const double max_unmapped = args.max_unmapped.value_or(cfg.max_unmapped_fraction);

    const auto snapshot = kg::load_snapshot(args.snapshot);
    const fs::path dir = args.out_dir.empty() ? cfg.output_dir / "audit" : fs::path(args.out_dir);

    const auto findings = audit::validate_snapshot(snapshot, &map);
    auto result = audit::run_audit(snapshot, map, table->second, schedule, options);

    std::vector<csv::Row> unmapped_rows;
    std::size_t unmapped_refs = 0;
    for (const auto& u : result.unmapped) {
        unmapped_rows.push_back({u.source, u.raw_ref, u.label, std::to_string(u.rows)});
        unmapped_refs += u.rows;
    }
    const auto unmapped_csv = csv::format_table({"source", "raw_ref", "label", "rows"}, unmapped_rows);
    const double fraction = result.party_refs == 0 ? 0.0 : static_cast<double>(unmapped_refs) / result.party_refs;
    if (fraction > max_unmapped) {
        write_outputs({{dir / "unmapped_parties.csv", unmapped_csv}, {dir / "findings.csv", format_findings(findings)}});
        err << fmt::format("error: {} of {} party references ({:.1f}%) are not in the normalization map (limit "
                           "{:.1f}%); review {}\n",
                           unmapped_refs, result.party_refs, fraction * 100, max_unmapped * 100,
                           (dir / "unmapped_parties.csv").string());
        return kFailure;
    }

    std::vector<csv::Row> coverage_rows;
    for (const auto& c : result.coverage) {
        coverage_rows.push_back({c.source, to_iso(c.time_point), std::to_string(c.active_total),
                                 std::to_string(c.undated), c.low_sample ? "true" : "false"});
        if (c.low_sample)
            err << fmt::format("warning: {} {}: only {} active politicians, shares are hard to interpret\n", c.source,
                               to_iso(c.time_point), c.active_total);
    }
    for (const auto& note : result.notes)
        err << "note: " << note << "\n";
    if (!findings.empty())
        err << fmt::format("{} data-quality finding(s), see {}\n", findings.size(), (dir / "findings.csv").string());

    write_outputs({
        {dir / "audit.csv", report::emit_series_csv(result.rows)},
        {dir / "coverage.csv",
         csv::format_table({"source", "time_point", "active_total", "undated", "low_sample"}, coverage_rows)},
        {dir / "findings.csv", format_findings(findings)},
        {dir / "unmapped_parties.csv", unmapped_csv},
    });
    out << (dir / "audit.csv").string() << "\n";
    return kSuccess;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
    std::string corpus;
    std::optional<double> alpha;
    std::optional<double> beta;
    bool require_nel = false;
    std::string out_dir;
};

std::vector<entities::TextDocument> load_corpus(const fs::path& path) {
    std::vector<entities::TextDocument> docs;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".txt")
                files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            docs.push_back({f.stem().string(), csv::read_file(f), std::nullopt});
        return docs;
    }
    auto table = csv::read_table(path);
    table.require_columns({"doc_id", "text"}, path.string());
    auto c_id = table.column("doc_id");
    auto c_text = table.column("text");
    for (const auto& r : table.rows)
        docs.push_back({r[c_id], r[c_text], std::nullopt});
    return docs;
}

// Rule hits win over annotator hits on overlapping spans.
std::vector<entities::EntityMention> merge_mentions(std::vector<entities::EntityMention> rules,
                                                    const std::vector<entities::EntityMention>& annotated) {
    for (const auto& a : annotated) {
        bool overlaps = std::any_of(rules.begin(), rules.end(), [&](const entities::EntityMention& r) {
            return r.provenance == entities::Provenance::rule && a.char_start < r.char_end && r.char_start < a.char_end;
        });
        if (!overlaps)
            rules.push_back(a);
    }
    std::stable_sort(rules.begin(), rules.end(), [](const auto& x, const auto& y) {
        return std::tie(x.char_start, x.char_end) < std::tie(y.char_start, y.char_end);
    });
    return rules;
}

int cmd_score(const RunConfig& cfg, const ScoreArgs& args, std::ostream& out, std::ostream& err) {
    diversity::DiversityParams params = cfg.diversity;
    if (args.alpha)
        params.alpha = *args.alpha;
    if (args.beta)
        params.beta = *args.beta;
    try {
        params.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }

    std::vector<entities::MatchRule> rules;
    if (cfg.rules)
        rules = entities::load_rules(*cfg.rules);
    const auto ontology = entities::LocalOntology::load(cfg.ontology);

    std::unique_ptr<entities::TripleSource> source;
    if (cfg.sparql_enrichment) {
        auto catalog = kg::TemplateCatalog::load(cfg.templates);
        auto client = std::make_shared<kg::SparqlClient>(cfg.endpoints.at(cfg.knowledge_dialect),
                                                         std::make_shared<http::HttpTransport>());
        source = std::make_unique<entities::SparqlTripleSource>(client, catalog);
    } else {
        auto mem = std::make_unique<entities::InMemoryTripleSource>(cfg.knowledge_dialect);
        if (cfg.triples)
            for (auto& t : entities::parse_ntriples(csv::read_file(*cfg.triples)))
                mem->add(std::move(t));
        source = std::move(mem);
    }

    if (args.require_nel && !cfg.annotator)
        throw ConfigError("--require-nel needs an annotator url in the config");
    http::HttpTransport annotator_transport;
    bool annotator_down = false;

    const auto docs = load_corpus(args.corpus);
    std::map<std::string, entities::EnrichedEntity> enriched;
    std::vector<csv::Row> score_rows, count_rows;

    for (const auto& doc : docs) {
        auto mentions = entities::match_rules(doc, rules);
        if (cfg.annotator && !annotator_down) {
            try {
                mentions = merge_mentions(std::move(mentions), entities::annotate(doc, annotator_transport, *cfg.annotator));
            } catch (const Error& e) {
                if (args.require_nel)
                    throw;
                err << fmt::format("warning: annotation service unavailable ({}); continuing with rule matches only\n",
                                   e.what());
                annotator_down = true;
            }
        }

        for (const auto& m : mentions) {
            if (!m.resolved_id || enriched.contains(*m.resolved_id))
                continue;
            try {
                auto e = entities::enrich_entity(*m.resolved_id, *source, ontology);
                for (const auto& w : e.warnings)
                    err << "warning: " << w << "\n";
                enriched.emplace(*m.resolved_id, std::move(e));
            } catch (const Error& e) {
                err << fmt::format("warning: {} not enriched: {}\n", *m.resolved_id, e.what());
                enriched.emplace(*m.resolved_id, entities::EnrichedEntity{*m.resolved_id, {}, {}, {}, {}});
            }
        }
        mentions = entities::retain_actor_mentions(mentions, enriched);
        auto counts = entities::aggregate_mentions(mentions);

        std::vector<diversity::EntityRecord> records;
        for (const auto& [key, n] : counts) {
            diversity::EntityRecord r;
            r.id = key;
            if (auto it = enriched.find(key); it != enriched.end()) {
                r.features = it->second.features;
                r.actor_type = it->second.actor_type.value_or(diversity::ActorType::person);
            } else {
                // Unnamed categories have no resource; their label is their only feature.
                r.features = {{"unnamed", key}};
            }
            records.push_back(std::move(r));
            count_rows.push_back({doc.doc_id, key, std::to_string(n)});
        }
        double delta = 0.0;
        if (!counts.empty()) {
            auto balance = diversity::compute_balance(counts);
            auto disparity = diversity::compute_disparity(records, cfg.metric);
            delta = diversity::stirling_delta(balance, disparity, params).delta;
        }
        score_rows.push_back({doc.doc_id, std::to_string(counts.size()), fmt::format("{:.6f}", delta)});
    }

    const fs::path dir = args.out_dir.empty() ? cfg.output_dir / "score" : fs::path(args.out_dir);
    write_outputs({{dir / "scores.csv", csv::format_table({"doc_id", "n_entities", "delta"}, score_rows)},
                   {dir / "entity_counts.csv", csv::format_table({"doc_id", "entity", "count"}, count_rows)}});
    out << (dir / "scores.csv").string() << "\n";
    return kSuccess;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
    std::string audit_file;
    std::string style = "line";
    std::string body;
    std::string out_dir;
};

std::string file_stem_safe(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.')
            c = '_';
    return s;
}

int cmd_report(const RunConfig& cfg, const ReportArgs& args, std::ostream& out, std::ostream& err) {
    const auto style = args.style == "stacked" ? report::RenderStyle::stacked : report::RenderStyle::line;
    const std::string body = !args.body.empty() ? args.body : cfg.body.value_or("baseline");
    std::vector<audit::AuditRow> rows;
    try {
        rows = report::parse_series_csv(csv::read_file(args.audit_file), args.audit_file);
    } catch (const report::SeriesParseError& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    auto figures = report::figures_from_rows(rows, body, style);
    if (figures.empty()) {
        report::FigureSpec empty;
        empty.source = "none";
        empty.body = body;
        empty.title = "no audit rows";
        empty.style = style;
        figures.push_back(std::move(empty));
    }
    const fs::path dir = args.out_dir.empty() ? fs::path(args.audit_file).parent_path() : fs::path(args.out_dir);
    std::vector<std::pair<fs::path, std::string>> files;
    for (const auto& f : figures)
        files.emplace_back(dir / (file_stem_safe(f.source + "_" + f.body) + ".svg"), report::emit_figure_svg(f));
    write_outputs(files);
    for (const auto& [path, content] : files)
        out << path.string() << "\n";
    return kSuccess;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
    std::string snapshot;
    std::string map;
    std::string parties;
};

int cmd_validate(const RunConfig& cfg, const ValidateArgs& args, std::ostream& out, std::ostream& err) {
    std::optional<audit::NormalizationMap> map;
    fs::path map_path = !args.map.empty() ? fs::path(args.map) : cfg.normalization_map.value_or(fs::path{});
    if (!map_path.empty()) {
        fs::path parties = !args.parties.empty() ? fs::path(args.parties)
                           : cfg.party_classes   ? *cfg.party_classes
                                                 : map_path.parent_path() / "party_classes.csv";
        map = audit::NormalizationMap::load(map_path, parties);
    }
    const auto snapshot = kg::load_snapshot(args.snapshot);
    const auto findings = audit::validate_snapshot(snapshot, map ? &*map : nullptr);
    out << format_findings(findings);
    err << fmt::format("{} finding(s) over {} politician rows\n", findings.size(), snapshot.politicians.size());
    return kSuccess;
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration

RunConfig RunConfig::defaults() {
    RunConfig c;
    for (auto d : kg::all_dialects())
        c.endpoints[d] = kg::EndpointConfig::defaults_for(d);
    c.templates = fs::path(KGDIV_DATA_DIR) / "templates.json";
    c.ontology = fs::path(KGDIV_DATA_DIR) / "ontology.json";
    return c;
}

RunConfig RunConfig::parse(std::string_view json_text, const fs::path& base_dir) {
    RunConfig c = defaults();
    auto path_of = [&](const json& v) {
        fs::path p = v.get<std::string>();
        return p.is_absolute() ? p : base_dir / p;
    };
    try {
        const auto doc = json::parse(json_text);
        if (!doc.is_object())
            throw ConfigError("config must be a JSON object");
        if (doc.contains("endpoints")) {
            for (const auto& [name, node] : doc.at("endpoints").items()) {
                auto d = kg::parse_dialect(name);
                if (!d)
                    throw ConfigError(fmt::format("config: unknown endpoint dialect '{}'", name));
                auto& e = c.endpoints[*d];
                if (node.contains("url"))
                    e.url = node.at("url").get<std::string>();
                if (node.contains("page_size"))
                    e.page_size = node.at("page_size").get<std::size_t>();
                if (node.contains("max_requests_per_second"))
                    e.max_requests_per_second = node.at("max_requests_per_second").get<double>();
                if (node.contains("retry_limit"))
                    e.retry_limit = node.at("retry_limit").get<unsigned>();
                if (node.contains("timeout_ms"))
                    e.timeout = std::chrono::milliseconds(node.at("timeout_ms").get<long>());
                if (node.contains("backoff_ms"))
                    e.backoff_base = std::chrono::milliseconds(node.at("backoff_ms").get<long>());
                if (node.contains("format")) {
                    auto f = node.at("format").get<std::string>();
                    if (f == "json")
                        e.format = kg::ResultFormat::sparql_json;
                    else if (f == "xml")
                        e.format = kg::ResultFormat::sparql_xml;
                    else
                        throw ConfigError(fmt::format("config: endpoint format '{}' is not json or xml", f));
                }
                e.validate();
            }
        }
        if (doc.contains("templates"))
            c.templates = path_of(doc.at("templates"));
        if (doc.contains("ontology"))
            c.ontology = path_of(doc.at("ontology"));
        if (doc.contains("normalization_map"))
            c.normalization_map = path_of(doc.at("normalization_map"));
        if (doc.contains("party_classes"))
            c.party_classes = path_of(doc.at("party_classes"));
        if (doc.contains("baselines"))
            c.baselines = path_of(doc.at("baselines"));
        if (doc.contains("career_end"))
            c.career_end = path_of(doc.at("career_end"));
        if (doc.contains("body"))
            c.body = doc.at("body").get<std::string>();
        if (doc.contains("schedule")) {
            std::string joined;
            for (const auto& v : doc.at("schedule"))
                joined += (joined.empty() ? "" : ",") + (v.is_number() ? std::to_string(v.get<int>()) : v.get<std::string>());
            c.schedule = parse_schedule(joined);
        }
        if (doc.contains("baseline_policy")) {
            auto p = audit::parse_baseline_policy(doc.at("baseline_policy").get<std::string>());
            if (!p)
                throw ConfigError("config: baseline_policy must be preceding or closest");
            c.baseline_policy = *p;
        }
        if (doc.contains("max_unmapped_fraction"))
            c.max_unmapped_fraction = doc.at("max_unmapped_fraction").get<double>();
        if (doc.contains("diversity")) {
            const auto& dv = doc.at("diversity");
            if (dv.contains("alpha"))
                c.diversity.alpha = dv.at("alpha").get<double>();
            if (dv.contains("beta"))
                c.diversity.beta = dv.at("beta").get<double>();
            if (dv.contains("metric"))
                c.metric = dv.at("metric").get<std::string>();
            if (dv.contains("rules"))
                c.rules = path_of(dv.at("rules"));
            if (dv.contains("triples"))
                c.triples = path_of(dv.at("triples"));
            if (dv.contains("knowledge_source")) {
                auto ks = dv.at("knowledge_source").get<std::string>();
                if (ks == "sparql")
                    c.sparql_enrichment = true;
                else if (ks != "triples")
                    throw ConfigError("config: diversity.knowledge_source must be triples or sparql");
            }
            if (dv.contains("dialect")) {
                auto d = kg::parse_dialect(dv.at("dialect").get<std::string>());
                if (!d)
                    throw ConfigError("config: unknown diversity.dialect");
                c.knowledge_dialect = *d;
            }
            if (dv.contains("annotator")) {
                const auto& an = dv.at("annotator");
                entities::AnnotatorConfig a;
                a.url = an.at("url").get<std::string>();
                if (an.contains("confidence"))
                    a.confidence = an.at("confidence").get<double>();
                if (an.contains("timeout_ms"))
                    a.timeout = std::chrono::milliseconds(an.at("timeout_ms").get<long>());
                c.annotator = a;
            }
        }
        if (doc.contains("output_dir"))
            c.output_dir = path_of(doc.at("output_dir"));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config: {}", e.what()));
    }
    c.diversity.validate();

    std::vector<fs::path> must_exist{c.templates, c.ontology};
    for (const auto* p : {&c.normalization_map, &c.party_classes, &c.baselines, &c.career_end, &c.rules, &c.triples})
        if (*p)
            must_exist.push_back(**p);
    for (const auto& p : must_exist)
        if (!fs::exists(p))
            throw ConfigError(fmt::format("config: '{}' does not exist", p.string()));
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text, fs::absolute(path).parent_path());
}

void RunConfig::apply_environment() {
    for (auto& [d, e] : endpoints) {
        std::string var = "KGDIV_ENDPOINT_";
        for (char ch : to_string(d))
            var.push_back(ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
        if (const char* v = std::getenv(var.c_str()); v && *v)
            e.url = v;
    }
}

// ---------------------------------------------------------------------------
// Entry point

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Diversity scoring and representation-bias audits over DBpedia and Wikidata", "kgdiv"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);

    const std::vector<std::string> sources{"en-dbpedia", "nl-dbpedia", "wikidata"};

    FetchArgs fetch;
    auto* fetch_cmd = app.add_subcommand("fetch", "Fetch politician and party snapshots from a knowledge graph");
    fetch_cmd->add_option("--source", fetch.source, "Knowledge source")->required()->check(CLI::IsMember(sources));
    fetch_cmd->add_option("--from-fixture", fetch.fixture_dir, "Serve queries from recorded results")
        ->check(CLI::ExistingDirectory);
    fetch_cmd->add_option("--out", fetch.out_dir, "Snapshot root; files go to <out>/<source>/");

    AuditArgs aud;
    auto* audit_cmd = app.add_subcommand("audit", "Bound party visibility and compare it with seat shares");
    audit_cmd->add_option("--snapshot", aud.snapshot, "Snapshot directory")->required();
    audit_cmd->add_option("--baseline", aud.baseline, "Baseline seats CSV");
    audit_cmd->add_option("--map", aud.map, "Party alias map CSV");
    audit_cmd->add_option("--parties", aud.parties, "Party classes CSV (default: party_classes.csv beside the map)");
    audit_cmd->add_option("--schedule", aud.schedule, "Comma separated years or dates");
    audit_cmd->add_option("--baseline-policy", aud.policy, "Election chosen for each time point")
        ->check(CLI::IsMember({"preceding", "closest"}));
    audit_cmd->add_option("--body", aud.body, "Baseline body, e.g. KVV or VP");
    audit_cmd->add_option("--out", aud.out_dir, "Output directory");
    audit_cmd->add_option("--today", aud.today, "Cap for open-ended careers (default: snapshot date)");
    audit_cmd->add_option("--career-end", aud.career_end, "CSV politician_id,career_end");
    audit_cmd->add_option("--max-unmapped", aud.max_unmapped, "Largest tolerated unmapped fraction")
        ->check(CLI::Range(0.0, 1.0));

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "Stirling diversity of the actors mentioned in each document");
    score_cmd->add_option("--corpus", score.corpus, "Directory of .txt files or CSV doc_id,text")
        ->required()
        ->check(CLI::ExistingPath);
    score_cmd->add_option("--alpha", score.alpha, "Disparity exponent")->check(CLI::NonNegativeNumber);
    score_cmd->add_option("--beta", score.beta, "Balance exponent")->check(CLI::NonNegativeNumber);
    score_cmd->add_flag("--require-nel", score.require_nel, "Fail instead of falling back to rule matches");
    score_cmd->add_option("--out", score.out_dir, "Output directory");

    ReportArgs rep;
    auto* report_cmd = app.add_subcommand("report", "Render audit series as SVG figures");
    report_cmd->add_option("--audit", rep.audit_file, "audit.csv")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--style", rep.style, "Rendering")->check(CLI::IsMember({"line", "stacked"}));
    report_cmd->add_option("--body", rep.body, "Baseline body label");
    report_cmd->add_option("--out", rep.out_dir, "Output directory (default: beside the audit file)");

    ValidateArgs val;
    auto* validate_cmd = app.add_subcommand("validate", "List data-quality findings of a snapshot");
    validate_cmd->add_option("--snapshot", val.snapshot, "Snapshot directory")->required();
    validate_cmd->add_option("--map", val.map, "Party alias map CSV");
    validate_cmd->add_option("--parties", val.parties, "Party classes CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsage;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig::defaults() : RunConfig::load(config_path);
        cfg.apply_environment();
        if (*fetch_cmd)
            return cmd_fetch(cfg, fetch, out, err);
        if (*audit_cmd)
            return cmd_audit(cfg, aud, out, err);
        if (*score_cmd)
            return cmd_score(cfg, score, out, err);
        if (*report_cmd)
            return cmd_report(cfg, rep, out, err);
        if (*validate_cmd)
            return cmd_validate(cfg, val, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

} // namespace kgdiv::cli
