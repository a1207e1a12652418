#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgdiv/http.hpp"
#include "kgdiv/sparql.hpp"

namespace kgdiv::kg {

enum class Dialect { en_dbpedia, nl_dbpedia, wikidata };

std::string_view to_string(Dialect d);
std::optional<Dialect> parse_dialect(std::string_view s);
std::vector<Dialect> all_dialects();

// Thrown for requests that are wrong before they are sent: dialect
// mismatch, unbound placeholders, non-retryable HTTP statuses.
class QueryError : public Error {
public:
    using Error::Error;
};

struct EndpointConfig {
    std::string url;
    Dialect dialect = Dialect::en_dbpedia;
    std::size_t page_size = 10000;
    double max_requests_per_second = 1.0;
    unsigned retry_limit = 3;
    std::chrono::milliseconds timeout{30000};
    std::chrono::milliseconds backoff_base{1000}; // doubled after every failed attempt
    ResultFormat format = ResultFormat::sparql_json;

    void validate() const; // throws ConfigError

    static EndpointConfig defaults_for(Dialect d);
};

// Query text uses {{name}} placeholders. Every template must carry an
// ORDER BY so that LIMIT/OFFSET pages are stable.
struct QueryTemplate {
    std::string id;
    Dialect dialect = Dialect::en_dbpedia;
    std::string query_text;
    std::map<std::string, std::string> parameters; // declared name -> default ("" = required)
    std::vector<std::string> result_variables;

    std::vector<std::string> placeholders() const;
    void validate() const; // throws ConfigError
    // Substitutes placeholders; explicit params win over defaults. The result
    // starts with a "# kgdiv-template: <id>" comment line.
    std::string bind(const std::map<std::string, std::string>& params) const;
};

class TemplateCatalog {
public:
    void add(QueryTemplate t);
    const QueryTemplate* find(std::string_view id, Dialect d) const;
    const QueryTemplate& get(std::string_view id, Dialect d) const; // throws ConfigError
    std::size_t size() const { return templates_.size(); }

    static TemplateCatalog parse(std::string_view json_text);
    static TemplateCatalog load(const std::filesystem::path& path);

private:
    std::map<std::pair<std::string, Dialect>, QueryTemplate> templates_;
};

// Spaces request starts at least 1/rate seconds apart. Thread-safe.
class RateLimiter {
public:
    explicit RateLimiter(double max_requests_per_second);
    void acquire();
    double rate() const { return rate_; }

private:
    double rate_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_slot_{};
};

// One limiter per endpoint url for the whole process, so concurrent clients
// of the same endpoint share a single cap. The first registration fixes the
// rate; later calls with a lower rate tighten it.
std::shared_ptr<RateLimiter> shared_rate_limiter(const std::string& url, double max_requests_per_second);

struct ExecutionStats {
    std::size_t requests = 0;
    std::size_t retries = 0;
    std::size_t pages = 0;
    std::size_t duplicate_rows = 0;
};

class SparqlClient {
public:
    SparqlClient(EndpointConfig endpoint, std::shared_ptr<http::Transport> transport);

    // Pages with LIMIT/OFFSET until a short page, drops duplicate rows
    // (full-row equality, first occurrence kept), honours the rate limit and
    // retries transient failures.
    ResultTable execute(const QueryTemplate& tmpl, const std::map<std::string, std::string>& params = {});

    // Sends one already bound query without paging.
    ResultTable execute_raw(const std::string& query);

    const EndpointConfig& endpoint() const { return endpoint_; }
    const ExecutionStats& stats() const { return stats_; }

private:
    http::Response send_with_retries(const std::string& query);

    EndpointConfig endpoint_;
    std::shared_ptr<http::Transport> transport_;
    std::shared_ptr<RateLimiter> limiter_;
    ExecutionStats stats_;
};

ResultTable execute_query(const EndpointConfig& endpoint, const QueryTemplate& tmpl,
                          const std::map<std::string, std::string>& params,
                          std::shared_ptr<http::Transport> transport);

// ---------------------------------------------------------------------------
// Snapshots

struct PoliticianRow {
    std::string source;
    std::string politician_id;
    std::string label;
    std::string party_id;
    std::string aff_start;
    std::string aff_end;
    std::string death_date;
    std::string position;
    std::string retrieved_at;

    auto operator<=>(const PoliticianRow&) const = default;
};

struct PartyRow {
    std::string source;
    std::string party_id;
    std::string label;
    std::string country;
    std::string raw_alignment;
    std::string retrieved_at;

    auto operator<=>(const PartyRow&) const = default;
};

const std::vector<std::string>& politician_columns();
const std::vector<std::string>& party_columns();

std::string format_politicians_csv(const std::vector<PoliticianRow>& rows);
std::string format_parties_csv(const std::vector<PartyRow>& rows);
std::vector<PoliticianRow> parse_politicians_csv(std::string_view text, std::string_view what = "politicians.csv");
std::vector<PartyRow> parse_parties_csv(std::string_view text, std::string_view what = "parties.csv");

struct Snapshot {
    std::vector<PoliticianRow> politicians;
    std::vector<PartyRow> parties;
};

// Reads DIR/politicians.csv and DIR/parties.csv, or, when DIR holds one
// subdirectory per source instead, all of them in name order.
Snapshot load_snapshot(const std::filesystem::path& dir);

// Template ids used by the fetchers.
inline constexpr std::string_view kPoliticiansTemplate = "politicians";
inline constexpr std::string_view kPartiesTemplate = "parties";
inline constexpr std::string_view kPartyPropertyTemplate = "parties.party_property";

// One row per (politician, affiliation) with dates normalized to YYYY-MM-DD;
// sorted and free of duplicates.
std::vector<PoliticianRow> fetch_politicians(SparqlClient& client, const TemplateCatalog& catalog,
                                             std::string_view retrieved_at);

// nl-dbpedia finds no parties by type + country, so there the result is
// united with the parties that occur as the party of some other entity.
std::vector<PartyRow> fetch_parties(SparqlClient& client, const TemplateCatalog& catalog,
                                    std::string_view retrieved_at);

// ---------------------------------------------------------------------------
// Recorded fixtures

// Answers SPARQL protocol requests from recorded result documents laid out
// as DIR/<dialect>/<template id>.json (full, unpaged results). LIMIT and
// OFFSET in the query are applied to the recorded rows.
class FixtureService {
public:
    explicit FixtureService(std::filesystem::path dir);

    http::Response handle(Dialect dialect, const std::string& query) const;

    // Reads manifest.json's "retrieved_at", if present.
    std::optional<std::string> retrieved_at() const;

private:
    std::filesystem::path dir_;
};

// In-process transport over a FixtureService for one dialect.
class FixtureTransport final : public http::Transport {
public:
    FixtureTransport(std::shared_ptr<const FixtureService> service, Dialect dialect);
    http::Response send(const http::Request& request) override;
    std::size_t requests() const { return requests_; }

private:
    std::shared_ptr<const FixtureService> service_;
    Dialect dialect_;
    std::size_t requests_ = 0;
};

// Pulls the `query` parameter out of a GET url or form-encoded POST body.
std::optional<std::string> extract_query(const http::Request& request);

} // namespace kgdiv::kg
