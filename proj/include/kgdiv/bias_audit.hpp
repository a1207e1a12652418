#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgdiv/dates.hpp"
#include "kgdiv/errors.hpp"
#include "kgdiv/kg_clients.hpp"

namespace kgdiv::audit {

// Declaration order is the figure order.
enum class Alignment { extreme_left, left, centre_left, centre, centre_right, right, extreme_right, other, unknown };

std::string_view to_string(Alignment a);
std::optional<Alignment> parse_alignment(std::string_view s);
const std::vector<Alignment>& all_alignments();

enum class Relevance { relevant, not_relevant, foreign };

std::string_view to_string(Relevance r);
std::optional<Relevance> parse_relevance(std::string_view s);

struct DateInterval {
    std::optional<Date> start;
    std::optional<Date> end;

    bool is_inverted() const { return start && end && *end < *start; }
    // Inclusive on both ends; a missing endpoint is unbounded.
    bool contains(Date d) const { return (!start || *start <= d) && (!end || d <= *end); }

    bool operator==(const DateInterval&) const = default;
};

struct PartyRecord {
    std::string canonical_acronym;
    Alignment alignment = Alignment::unknown;
    Relevance relevance = Relevance::relevant;
};

// How an affiliation's party reference resolved.
enum class PartyStatus { relevant, not_relevant, foreign, unmapped, none };

struct Affiliation {
    std::string party; // canonical acronym; the raw ref when unmapped; empty when the row named no party
    DateInterval interval;
    PartyStatus status = PartyStatus::none;

    bool operator==(const Affiliation&) const = default;
};

struct PoliticianRecord {
    std::string source;
    std::string id;
    std::string label;
    std::vector<Affiliation> affiliations;
    std::optional<Date> death_date;
    std::optional<Date> career_end_override;

    // Canonical acronyms of the relevant parties over the whole career, sorted.
    std::vector<std::string> relevant_parties() const;
};

struct NormalizationMap {
    std::map<std::string, std::string> alias_to_canonical;
    std::map<std::string, PartyRecord> canonical_to_party;

    // Every alias must point at a known canonical party. Throws ConfigError.
    void validate() const;
    const PartyRecord* party(std::string_view canonical) const;
    // Tries the ref itself, then (for IRIs) its last path segment with
    // underscores read as spaces, then `label` if given.
    std::optional<std::string> resolve(std::string_view raw_ref, std::string_view label = {}) const;

    // map CSV: alias,canonical_acronym; parties CSV: canonical_acronym,alignment,relevance.
    // Canonical acronyms also resolve to themselves.
    static NormalizationMap parse(std::string_view map_csv, std::string_view parties_csv);
    static NormalizationMap load(const std::filesystem::path& map_path, const std::filesystem::path& parties_path);
};

struct UnmappedRef {
    std::string source;
    std::string raw_ref;
    std::string label;
    std::size_t rows = 0;
};

struct NormalizedSnapshot {
    std::vector<PoliticianRecord> politicians; // sorted by (source, id)
    std::vector<UnmappedRef> unmapped;          // sorted by (source, raw_ref)
    std::size_t party_refs = 0;                 // rows naming a party
};

// Groups rows per (source, politician), collapses aliases, merges duplicate
// (party, interval) pairs and flags non-relevant, foreign and unmapped refs.
// `career_end` maps politician ids to curated career-end dates.
NormalizedSnapshot normalize_affiliations(const kg::Snapshot& snapshot, const NormalizationMap& map,
                                          const std::map<std::string, Date>& career_end = {});

// Convex hull of all dated evidence. Open ends, and known ends past it, are
// capped by min(today, death date, career-end override). Returns nullopt
// when there is no dated evidence or the cap falls before the first start.
std::optional<DateInterval> activity_period(const PoliticianRecord& p, Date today);

// Politicians whose activity period contains t.
std::vector<const PoliticianRecord*> select_active(std::span<const PoliticianRecord> politicians, Date t, Date today);

struct VisibilityBounds {
    std::string canonical_acronym;
    Date time_point;
    std::size_t lower_count = 0;
    std::size_t upper_count = 0;
    double lower_share = 0.0;
    double upper_share = 0.0;
    std::size_t active_total = 0;
};

// One entry per party in `parties` (callers pass the relevant ones). Empty
// when `active` is empty.
std::vector<VisibilityBounds> compute_bounds(std::span<const PoliticianRecord* const> active, Date t,
                                             std::span<const std::string> parties);

struct Election {
    std::map<std::string, std::uint64_t> seats;
    std::uint64_t total_seats = 0;
};

struct BaselineTable {
    std::string body;
    std::map<Date, Election> elections;

    void validate() const; // throws DataError
};

// CSV columns body,election_date,canonical_acronym,seats,total_seats.
std::map<std::string, BaselineTable> parse_baselines(std::string_view text, std::string_view what = "baselines");
std::map<std::string, BaselineTable> load_baselines(const std::filesystem::path& path);

enum class BaselinePolicy { most_recent_preceding, closest_in_time };

std::string_view to_string(BaselinePolicy p);
std::optional<BaselinePolicy> parse_baseline_policy(std::string_view s);

// Election date chosen for t; nullopt when t precedes every election under
// most_recent_preceding. Equidistant elections resolve to the earlier one.
std::optional<Date> select_election(const BaselineTable& table, Date t, BaselinePolicy policy);

// seats / total_seats at the selected election, 0 for absent parties.
// Throws DataError when no election qualifies.
double baseline_share(const BaselineTable& table, std::string_view party, Date t, BaselinePolicy policy);

enum class Verdict { over, under, indeterminate };

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view s);

struct RepresentationVerdict {
    std::string canonical_acronym;
    Date time_point;
    Verdict verdict = Verdict::indeterminate;
    double baseline_share = 0.0;
    VisibilityBounds bounds;
};

RepresentationVerdict classify(const VisibilityBounds& bounds, double baseline);

inline constexpr std::size_t kLowSampleThreshold = 20;

inline std::vector<Date> default_schedule() {
    std::vector<Date> out;
    for (int y : {1990, 1996, 2000, 2005, 2011, 2015, 2020})
        out.push_back(january_first(y));
    return out;
}

struct AuditOptions {
    BaselinePolicy policy = BaselinePolicy::most_recent_preceding;
    std::optional<Date> today; // defaults to the latest retrieved_at per source
    std::map<std::string, Date> career_end;
};

struct AuditRow {
    std::string source;
    Date time_point;
    std::string canonical_acronym;
    Alignment alignment = Alignment::unknown;
    std::size_t lower_count = 0;
    std::size_t upper_count = 0;
    double lower_share = 0.0;
    double upper_share = 0.0;
    double baseline_share = 0.0;
    Verdict verdict = Verdict::indeterminate;
    std::size_t active_total = 0;
};

struct CoverageRow {
    std::string source;
    Date time_point;
    std::size_t active_total = 0;
    std::size_t undated = 0; // politicians without dated evidence, never active
    bool low_sample = false;
};

struct AuditResult {
    std::vector<AuditRow> rows;          // per source: figure order of parties, then time
    std::vector<CoverageRow> coverage;   // per source and time point
    std::vector<UnmappedRef> unmapped;
    std::size_t party_refs = 0;
    std::vector<std::string> notes;      // skipped time points and similar
};

// Per source: normalize, select the active politicians at every time point,
// bound each relevant party's visibility and classify it against the
// baseline. A party is listed (at every time point) when it is visible or
// holds seats at some time point.
AuditResult run_audit(const kg::Snapshot& snapshot, const NormalizationMap& map, const BaselineTable& baseline,
                      std::span<const Date> schedule, const AuditOptions& options = {});

struct Finding {
    std::string kind; // type-conflict, inverted-interval, death-before-start, no-relevant-affiliation
    std::string source;
    std::string subject;
    std::string detail;

    auto operator<=>(const Finding&) const = default;
};

// Data-quality checks over the raw rows. Without a map, every politician
// counts as having zero relevant affiliations only when it names no party.
std::vector<Finding> validate_snapshot(const kg::Snapshot& snapshot, const NormalizationMap* map = nullptr);

} // namespace kgdiv::audit
