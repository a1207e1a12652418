#include "kgdiv/kg_clients.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "kgdiv/csv.hpp"
#include "kgdiv/dates.hpp"

namespace kgdiv::kg {

using nlohmann::json;

std::string_view to_string(Dialect d) {
    switch (d) {
    case Dialect::en_dbpedia:
        return "en-dbpedia";
    case Dialect::nl_dbpedia:
        return "nl-dbpedia";
    case Dialect::wikidata:
        return "wikidata";
    }
    return "en-dbpedia";
}

std::optional<Dialect> parse_dialect(std::string_view s) {
    for (auto d : all_dialects())
        if (to_string(d) == s)
            return d;
    return std::nullopt;
}

std::vector<Dialect> all_dialects() {
    return {Dialect::en_dbpedia, Dialect::nl_dbpedia, Dialect::wikidata};
}

void EndpointConfig::validate() const {
    if (url.empty())
        throw ConfigError(fmt::format("{}: endpoint url is empty", to_string(dialect)));
    if (page_size < 1)
        throw ConfigError(fmt::format("{}: page_size must be >= 1", to_string(dialect)));
    if (!(max_requests_per_second > 0.0) || !std::isfinite(max_requests_per_second))
        throw ConfigError(fmt::format("{}: max_requests_per_second must be > 0", to_string(dialect)));
    if (timeout.count() <= 0)
        throw ConfigError(fmt::format("{}: timeout must be positive", to_string(dialect)));
}

EndpointConfig EndpointConfig::defaults_for(Dialect d) {
    EndpointConfig c;
    c.dialect = d;
    switch (d) {
    case Dialect::en_dbpedia:
        c.url = "https://dbpedia.org/sparql";
        c.page_size = 10000;
        c.max_requests_per_second = 2.0;
        break;
    case Dialect::nl_dbpedia:
        c.url = "https://nl.dbpedia.org/sparql";
        c.page_size = 10000;
        c.max_requests_per_second = 2.0;
        break;
    case Dialect::wikidata:
        c.url = "https://query.wikidata.org/sparql";
        c.page_size = 5000;
        c.max_requests_per_second = 1.0;
        break;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Templates

namespace {

const std::regex& placeholder_re() {
    static const std::regex re(R"(\{\{([A-Za-z_][A-Za-z0-9_]*)\}\})");
    return re;
}

bool contains_order_by(const std::string& q) {
    static const std::regex re(R"(order\s+by)", std::regex::icase);
    return std::regex_search(q, re);
}

} // namespace

std::vector<std::string> QueryTemplate::placeholders() const {
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(query_text.begin(), query_text.end(), placeholder_re());
         it != std::sregex_iterator(); ++it) {
        auto name = (*it)[1].str();
        if (std::find(out.begin(), out.end(), name) == out.end())
            out.push_back(name);
    }
    return out;
}

void QueryTemplate::validate() const {
    if (id.empty())
        throw ConfigError("query template without id");
    if (query_text.empty())
        throw ConfigError(fmt::format("template '{}': empty query", id));
    for (const auto& p : placeholders())
        if (!parameters.contains(p))
            throw ConfigError(fmt::format("template '{}': placeholder '{{{{{}}}}}' is not a declared parameter", id, p));
    if (result_variables.empty())
        throw ConfigError(fmt::format("template '{}': no result variables", id));
    if (!contains_order_by(query_text))
        throw ConfigError(fmt::format("template '{}': paged queries need an ORDER BY", id));
}

std::string QueryTemplate::bind(const std::map<std::string, std::string>& params) const {
    std::string out = fmt::format("# kgdiv-template: {}\n", id);
    std::size_t last = 0;
    for (auto it = std::sregex_iterator(query_text.begin(), query_text.end(), placeholder_re());
         it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        auto name = m[1].str();
        std::string value;
        if (auto p = params.find(name); p != params.end())
            value = p->second;
        else if (auto d = parameters.find(name); d != parameters.end() && !d->second.empty())
            value = d->second;
        else
            throw QueryError(fmt::format("template '{}': placeholder '{}' is unbound", id, name));
        out.append(query_text, last, static_cast<std::size_t>(m.position(0)) - last);
        out += value;
        last = static_cast<std::size_t>(m.position(0) + m.length(0));
    }
    out.append(query_text, last, std::string::npos);
    return out;
}

void TemplateCatalog::add(QueryTemplate t) {
    t.validate();
    auto key = std::make_pair(t.id, t.dialect);
    if (templates_.contains(key))
        throw ConfigError(fmt::format("duplicate template '{}' for {}", t.id, to_string(t.dialect)));
    templates_.emplace(std::move(key), std::move(t));
}

const QueryTemplate* TemplateCatalog::find(std::string_view id, Dialect d) const {
    auto it = templates_.find(std::make_pair(std::string(id), d));
    return it == templates_.end() ? nullptr : &it->second;
}

const QueryTemplate& TemplateCatalog::get(std::string_view id, Dialect d) const {
    if (const auto* t = find(id, d))
        return *t;
    throw ConfigError(fmt::format("no template '{}' for {}", id, to_string(d)));
}

TemplateCatalog TemplateCatalog::parse(std::string_view json_text) {
    TemplateCatalog catalog;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("template catalog: {}", e.what()));
    }
    try {
        for (const auto& entry : doc.at("templates")) {
            QueryTemplate t;
            t.id = entry.at("id").get<std::string>();
            auto dialect = entry.at("dialect").get<std::string>();
            auto d = parse_dialect(dialect);
            if (!d)
                throw ConfigError(fmt::format("template '{}': unknown dialect '{}'", t.id, dialect));
            t.dialect = *d;
            // Queries are stored as arrays of lines to keep the catalog readable.
            const auto& q = entry.at("query");
            if (q.is_array()) {
                for (const auto& line : q)
                    t.query_text += line.get<std::string>() + "\n";
            } else {
                t.query_text = q.get<std::string>();
            }
            if (entry.contains("parameters"))
                for (const auto& [k, v] : entry.at("parameters").items())
                    t.parameters.emplace(k, v.get<std::string>());
            t.result_variables = entry.at("result_variables").get<std::vector<std::string>>();
            catalog.add(std::move(t));
        }
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("template catalog: {}", e.what()));
    }
    return catalog;
}

TemplateCatalog TemplateCatalog::load(const std::filesystem::path& path) {
    std::ifstream probe(path);
    if (!probe)
        throw ConfigError(fmt::format("cannot open template catalog '{}'", path.string()));
    std::string text((std::istreambuf_iterator<char>(probe)), std::istreambuf_iterator<char>());
    return parse(text);
}

// ---------------------------------------------------------------------------
// Rate limiting

RateLimiter::RateLimiter(double max_requests_per_second) : rate_(max_requests_per_second) {
    if (!(rate_ > 0.0))
        throw ConfigError("rate limit must be positive");
}

void RateLimiter::acquire() {
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / rate_));
        slot = std::max(std::chrono::steady_clock::now(), next_slot_);
        next_slot_ = slot + interval;
    }
    std::this_thread::sleep_until(slot);
}

std::shared_ptr<RateLimiter> shared_rate_limiter(const std::string& url, double max_requests_per_second) {
    static std::mutex registry_mutex;
    static std::map<std::string, std::weak_ptr<RateLimiter>> registry;
    std::lock_guard lock(registry_mutex);
    auto& slot = registry[url];
    auto limiter = slot.lock();
    if (!limiter || max_requests_per_second < limiter->rate()) {
        limiter = std::make_shared<RateLimiter>(max_requests_per_second);
        slot = limiter;
    }
    return limiter;
}

// ---------------------------------------------------------------------------
// Client

SparqlClient::SparqlClient(EndpointConfig endpoint, std::shared_ptr<http::Transport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {
    endpoint_.validate();
    if (!transport_)
        throw ConfigError("SparqlClient needs a transport");
    limiter_ = shared_rate_limiter(endpoint_.url, endpoint_.max_requests_per_second);
}

namespace {

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status <= 599);
}

constexpr std::size_t kMaxGetUrl = 4000;

} // namespace

http::Response SparqlClient::send_with_retries(const std::string& query) {
    http::Request req;
    req.timeout = endpoint_.timeout;
    req.headers = {{"Accept", std::string(media_type(endpoint_.format))}, {"User-Agent", "kgdiv/0.1"}};
    auto encoded = http::form_encode({{"query", query}});
    if (endpoint_.url.size() + encoded.size() + 1 <= kMaxGetUrl) {
        req.method = http::Method::get;
        req.url = endpoint_.url + (endpoint_.url.find('?') == std::string::npos ? "?" : "&") + encoded;
    } else {
        req.method = http::Method::post;
        req.url = endpoint_.url;
        req.body = std::move(encoded);
        req.content_type = "application/x-www-form-urlencoded";
    }

    std::string last_error;
    for (unsigned attempt = 0; attempt <= endpoint_.retry_limit; ++attempt) {
        if (attempt > 0) {
            ++stats_.retries;
            std::this_thread::sleep_for(endpoint_.backoff_base * (1u << std::min(attempt - 1, 16u)));
        }
        limiter_->acquire();
        ++stats_.requests;
        try {
            auto resp = transport_->send(req);
            if (resp.status >= 200 && resp.status < 300)
                return resp;
            auto snippet = resp.body.substr(0, 200);
            if (!retryable_status(resp.status))
                throw QueryError(fmt::format("{}: HTTP {}: {}", endpoint_.url, resp.status, snippet));
            last_error = fmt::format("HTTP {}", resp.status);
        } catch (const TransportError& e) {
            last_error = e.what();
        }
    }
    throw TransportError(fmt::format("{}: giving up after {} attempt(s): {}", endpoint_.url,
                                     endpoint_.retry_limit + 1, last_error));
}

ResultTable SparqlClient::execute_raw(const std::string& query) {
    auto resp = send_with_retries(query);
    auto format = endpoint_.format;
    if (resp.content_type.find("json") != std::string::npos)
        format = ResultFormat::sparql_json;
    else if (resp.content_type.find("xml") != std::string::npos)
        format = ResultFormat::sparql_xml;
    return parse_results(resp.body, format);
}

ResultTable SparqlClient::execute(const QueryTemplate& tmpl, const std::map<std::string, std::string>& params) {
    if (tmpl.dialect != endpoint_.dialect)
        throw QueryError(fmt::format("template '{}' is written for {}, endpoint speaks {}", tmpl.id,
                                     to_string(tmpl.dialect), to_string(endpoint_.dialect)));
    const auto bound = tmpl.bind(params);

    ResultTable out;
    std::set<Binding> seen;
    for (std::size_t offset = 0;; offset += endpoint_.page_size) {
        auto page = execute_raw(fmt::format("{}LIMIT {}\nOFFSET {}\n", bound, endpoint_.page_size, offset));
        ++stats_.pages;
        if (out.variables.empty())
            out.variables = page.variables;
        for (auto& row : page.rows) {
            if (seen.insert(row).second)
                out.rows.push_back(std::move(row));
            else
                ++stats_.duplicate_rows;
        }
        if (page.rows.size() < endpoint_.page_size)
            break;
    }
    if (out.variables.empty())
        out.variables = tmpl.result_variables;
    return out;
}

ResultTable execute_query(const EndpointConfig& endpoint, const QueryTemplate& tmpl,
                          const std::map<std::string, std::string>& params,
                          std::shared_ptr<http::Transport> transport) {
    SparqlClient client(endpoint, std::move(transport));
    return client.execute(tmpl, params);
}

// ---------------------------------------------------------------------------
// Snapshots

const std::vector<std::string>& politician_columns() {
    static const std::vector<std::string> cols{"source",   "politician_id", "label",
                                               "party_id", "aff_start",     "aff_end",
                                               "death_date", "position",    "retrieved_at"};
    return cols;
}

const std::vector<std::string>& party_columns() {
    static const std::vector<std::string> cols{"source", "party_id", "label", "country", "raw_alignment",
                                               "retrieved_at"};
    return cols;
}

std::string format_politicians_csv(const std::vector<PoliticianRow>& rows) {
    std::vector<csv::Row> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back({r.source, r.politician_id, r.label, r.party_id, r.aff_start, r.aff_end, r.death_date,
                       r.position, r.retrieved_at});
    return csv::format_table(politician_columns(), out);
}

std::string format_parties_csv(const std::vector<PartyRow>& rows) {
    std::vector<csv::Row> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back({r.source, r.party_id, r.label, r.country, r.raw_alignment, r.retrieved_at});
    return csv::format_table(party_columns(), out);
}

namespace {

void check_date_field(const std::string& value, std::string_view what, std::size_t line) {
    if (!value.empty() && !parse_iso_date(value))
        throw DataError(fmt::format("{} line {}: '{}' is not a YYYY-MM-DD date", what, line, value));
}

} // namespace

std::vector<PoliticianRow> parse_politicians_csv(std::string_view text, std::string_view what) {
    auto t = csv::parse_table(text, what);
    t.require_columns(politician_columns(), what);
    std::vector<std::size_t> idx;
    for (const auto& c : politician_columns())
        idx.push_back(t.column(c));
    std::vector<PoliticianRow> rows;
    rows.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        PoliticianRow p{r[idx[0]], r[idx[1]], r[idx[2]], r[idx[3]], r[idx[4]],
                        r[idx[5]], r[idx[6]], r[idx[7]], r[idx[8]]};
        if (p.politician_id.empty())
            throw DataError(fmt::format("{} line {}: empty politician_id", what, t.line_numbers[i]));
        for (const auto* field : {&p.aff_start, &p.aff_end, &p.death_date, &p.retrieved_at})
            check_date_field(*field, what, t.line_numbers[i]);
        rows.push_back(std::move(p));
    }
    return rows;
}

std::vector<PartyRow> parse_parties_csv(std::string_view text, std::string_view what) {
    auto t = csv::parse_table(text, what);
    t.require_columns(party_columns(), what);
    std::vector<std::size_t> idx;
    for (const auto& c : party_columns())
        idx.push_back(t.column(c));
    std::vector<PartyRow> rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        PartyRow p{r[idx[0]], r[idx[1]], r[idx[2]], r[idx[3]], r[idx[4]], r[idx[5]]};
        check_date_field(p.retrieved_at, what, t.line_numbers[i]);
        rows.push_back(std::move(p));
    }
    return rows;
}

Snapshot load_snapshot(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    Snapshot snap;
    auto load_one = [&](const fs::path& d) {
        auto pol = d / "politicians.csv";
        auto pol_rows = parse_politicians_csv(csv::read_file(pol), pol.string());
        snap.politicians.insert(snap.politicians.end(), pol_rows.begin(), pol_rows.end());
        auto par = d / "parties.csv";
        if (fs::exists(par)) {
            auto par_rows = parse_parties_csv(csv::read_file(par), par.string());
            snap.parties.insert(snap.parties.end(), par_rows.begin(), par_rows.end());
        }
    };
    if (!fs::is_directory(dir))
        throw DataError(fmt::format("snapshot directory '{}' does not exist", dir.string()));
    if (fs::exists(dir / "politicians.csv")) {
        load_one(dir);
        return snap;
    }
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / "politicians.csv"))
            subdirs.push_back(e.path());
    if (subdirs.empty())
        throw DataError(fmt::format("no politicians.csv in '{}' or its subdirectories", dir.string()));
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& d : subdirs)
        load_one(d);
    return snap;
}

namespace {

std::string normalized_date(const ResultTable& t, std::size_t row, std::string_view var) {
    auto raw = t.value(row, var);
    if (raw.empty())
        return {};
    auto d = parse_date_lenient(raw);
    return d ? to_iso(*d) : std::string{};
}

template <typename Row>
void sort_unique(std::vector<Row>& rows) {
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
}

} // namespace

std::vector<PoliticianRow> fetch_politicians(SparqlClient& client, const TemplateCatalog& catalog,
                                             std::string_view retrieved_at) {
    const auto dialect = client.endpoint().dialect;
    auto table = client.execute(catalog.get(kPoliticiansTemplate, dialect));
    std::vector<PoliticianRow> rows;
    rows.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        PoliticianRow r;
        r.source = std::string(to_string(dialect));
        r.politician_id = table.value(i, "politician");
        if (r.politician_id.empty())
            continue;
        r.label = table.value(i, "label");
        r.party_id = table.value(i, "party");
        r.aff_start = normalized_date(table, i, "start");
        r.aff_end = normalized_date(table, i, "end");
        r.death_date = normalized_date(table, i, "death");
        r.position = table.value(i, "position");
        r.retrieved_at = std::string(retrieved_at);
        rows.push_back(std::move(r));
    }
    sort_unique(rows);
    return rows;
}

std::vector<PartyRow> fetch_parties(SparqlClient& client, const TemplateCatalog& catalog,
                                    std::string_view retrieved_at) {
    const auto dialect = client.endpoint().dialect;
    std::vector<const QueryTemplate*> pipeline{&catalog.get(kPartiesTemplate, dialect)};
    if (dialect == Dialect::nl_dbpedia)
        pipeline.push_back(&catalog.get(kPartyPropertyTemplate, dialect));

    std::vector<PartyRow> rows;
    for (const auto* tmpl : pipeline) {
        auto table = client.execute(*tmpl);
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            PartyRow r;
            r.source = std::string(to_string(dialect));
            r.party_id = table.value(i, "party");
            if (r.party_id.empty())
                continue;
            r.label = table.value(i, "label");
            r.country = table.value(i, "country");
            r.raw_alignment = table.value(i, "alignment");
            r.retrieved_at = std::string(retrieved_at);
            rows.push_back(std::move(r));
        }
    }
    sort_unique(rows);
    return rows;
}

// ---------------------------------------------------------------------------
// Fixtures

FixtureService::FixtureService(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_))
        throw ConfigError(fmt::format("fixture directory '{}' does not exist", dir_.string()));
}

std::optional<std::string> FixtureService::retrieved_at() const {
    auto manifest = dir_ / "manifest.json";
    if (!std::filesystem::exists(manifest))
        return std::nullopt;
    try {
        auto doc = json::parse(csv::read_file(manifest));
        if (doc.contains("retrieved_at"))
            return doc.at("retrieved_at").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", manifest.string(), e.what()));
    }
    return std::nullopt;
}

http::Response FixtureService::handle(Dialect dialect, const std::string& query) const {
    static const std::regex id_re(R"(#\s*kgdiv-template:\s*(\S+))");
    static const std::regex limit_re(R"(\bLIMIT\s+(\d+))", std::regex::icase);
    static const std::regex offset_re(R"(\bOFFSET\s+(\d+))", std::regex::icase);

    std::smatch m;
    if (!std::regex_search(query, m, id_re))
        return {400, "query carries no kgdiv-template marker", "text/plain"};
    auto path = dir_ / std::string(to_string(dialect)) / (m[1].str() + ".json");
    if (!std::filesystem::exists(path))
        return {404, fmt::format("no recorded result for '{}'", m[1].str()), "text/plain"};

    auto last_number = [&](const std::regex& re) -> std::optional<std::size_t> {
        std::optional<std::size_t> out;
        for (auto it = std::sregex_iterator(query.begin(), query.end(), re); it != std::sregex_iterator(); ++it)
            out = std::stoull((*it)[1].str());
        return out;
    };
    auto table = parse_results(csv::read_file(path), ResultFormat::sparql_json);
    std::size_t offset = std::min(last_number(offset_re).value_or(0), table.rows.size());
    std::size_t limit = last_number(limit_re).value_or(table.rows.size());
    ResultTable page;
    page.variables = table.variables;
    auto end = offset + std::min(limit, table.rows.size() - offset);
    page.rows.assign(table.rows.begin() + static_cast<std::ptrdiff_t>(offset),
                     table.rows.begin() + static_cast<std::ptrdiff_t>(end));
    return {200, serialize_results(page, ResultFormat::sparql_json), std::string(media_type(ResultFormat::sparql_json))};
}

std::optional<std::string> extract_query(const http::Request& request) {
    if (request.method == http::Method::get) {
        auto q = request.url.find('?');
        if (q == std::string::npos)
            return std::nullopt;
        auto params = http::parse_form(std::string_view(request.url).substr(q + 1));
        if (auto it = params.find("query"); it != params.end())
            return it->second;
        return std::nullopt;
    }
    if (request.content_type.starts_with("application/sparql-query"))
        return request.body;
    auto params = http::parse_form(request.body);
    if (auto it = params.find("query"); it != params.end())
        return it->second;
    return std::nullopt;
}

FixtureTransport::FixtureTransport(std::shared_ptr<const FixtureService> service, Dialect dialect)
    : service_(std::move(service)), dialect_(dialect) {}

http::Response FixtureTransport::send(const http::Request& request) {
    ++requests_;
    auto query = extract_query(request);
    if (!query)
        return {400, "missing query parameter", "text/plain"};
    return service_->handle(dialect_, *query);
}

} // namespace kgdiv::kg
