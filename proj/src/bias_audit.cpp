#include "kgdiv/bias_audit.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "kgdiv/csv.hpp"

namespace kgdiv::audit {

namespace {

constexpr std::string_view kAlignmentNames[] = {"extreme-left", "left",          "centre-left", "centre", "centre-right",
                                                "right",        "extreme-right", "other",       "unknown"};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<Date> opt_date(const std::string& s) {
    if (s.empty())
        return std::nullopt;
    return require_iso_date(s, "snapshot date");
}

std::string local_name(std::string_view iri) {
    auto cut = iri.find_last_of("/#");
    if (cut == std::string_view::npos)
        return {};
    std::string out(iri.substr(cut + 1));
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

Date system_today() {
    return Date{std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now())};
}

} // namespace

std::string_view to_string(Alignment a) {
    return kAlignmentNames[static_cast<std::size_t>(a)];
}

std::optional<Alignment> parse_alignment(std::string_view s) {
    auto t = trim(s);
    std::replace(t.begin(), t.end(), '_', '-');
    std::replace(t.begin(), t.end(), ' ', '-');
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    // American spelling shows up in Wikidata-derived tables.
    if (auto pos = t.find("center"); pos != std::string::npos)
        t.replace(pos, 6, "centre");
    for (std::size_t i = 0; i < std::size(kAlignmentNames); ++i)
        if (t == kAlignmentNames[i])
            return static_cast<Alignment>(i);
    return std::nullopt;
}

const std::vector<Alignment>& all_alignments() {
    static const std::vector<Alignment> all = [] {
        std::vector<Alignment> v;
        for (std::size_t i = 0; i < std::size(kAlignmentNames); ++i)
            v.push_back(static_cast<Alignment>(i));
        return v;
    }();
    return all;
}

std::string_view to_string(Relevance r) {
    switch (r) {
    case Relevance::relevant: return "relevant";
    case Relevance::not_relevant: return "not-relevant";
    case Relevance::foreign: return "foreign";
    }
    return "relevant";
}

std::optional<Relevance> parse_relevance(std::string_view s) {
    auto t = trim(s);
    if (t == "relevant")
        return Relevance::relevant;
    if (t == "not-relevant" || t == "not_relevant" || t == "not relevant")
        return Relevance::not_relevant;
    if (t == "foreign")
        return Relevance::foreign;
    return std::nullopt;
}

std::vector<std::string> PoliticianRecord::relevant_parties() const {
    std::set<std::string> s;
    for (const auto& a : affiliations)
        if (a.status == PartyStatus::relevant)
            s.insert(a.party);
    return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// Normalization

void NormalizationMap::validate() const {
    for (const auto& [alias, canonical] : alias_to_canonical)
        if (!canonical_to_party.contains(canonical))
            throw ConfigError(fmt::format("normalization map: alias '{}' points at unknown party '{}'", alias, canonical));
}

const PartyRecord* NormalizationMap::party(std::string_view canonical) const {
    auto it = canonical_to_party.find(std::string(canonical));
    return it == canonical_to_party.end() ? nullptr : &it->second;
}

std::optional<std::string> NormalizationMap::resolve(std::string_view raw_ref, std::string_view label) const {
    auto lookup = [&](std::string_view key) -> std::optional<std::string> {
        if (key.empty())
            return std::nullopt;
        if (auto it = alias_to_canonical.find(std::string(key)); it != alias_to_canonical.end())
            return it->second;
        if (canonical_to_party.contains(std::string(key)))
            return std::string(key);
        return std::nullopt;
    };
    if (auto r = lookup(raw_ref))
        return r;
    if (raw_ref.find("://") != std::string_view::npos)
        if (auto r = lookup(local_name(raw_ref)))
            return r;
    return lookup(label);
}

NormalizationMap NormalizationMap::parse(std::string_view map_csv, std::string_view parties_csv) {
    NormalizationMap m;
    try {
        auto parties = csv::parse_table(parties_csv, "party classes");
        parties.require_columns({"canonical_acronym", "alignment", "relevance"}, "party classes");
        auto c_acr = parties.column("canonical_acronym");
        auto c_al = parties.column("alignment");
        auto c_rel = parties.column("relevance");
        for (std::size_t i = 0; i < parties.rows.size(); ++i) {
            const auto& r = parties.rows[i];
            PartyRecord p;
            p.canonical_acronym = trim(r[c_acr]);
            auto al = parse_alignment(r[c_al]);
            auto rel = parse_relevance(r[c_rel]);
            if (p.canonical_acronym.empty() || !al || !rel)
                throw ConfigError(fmt::format("party classes line {}: need acronym, one of the nine alignments and "
                                              "relevant|not-relevant|foreign",
                                              parties.line_numbers[i]));
            p.alignment = *al;
            p.relevance = *rel;
            if (!m.canonical_to_party.emplace(p.canonical_acronym, p).second)
                throw ConfigError(fmt::format("party classes line {}: '{}' listed twice", parties.line_numbers[i],
                                              p.canonical_acronym));
        }

        auto aliases = csv::parse_table(map_csv, "normalization map");
        aliases.require_columns({"alias", "canonical_acronym"}, "normalization map");
        auto c_alias = aliases.column("alias");
        auto c_canon = aliases.column("canonical_acronym");
        for (std::size_t i = 0; i < aliases.rows.size(); ++i) {
            const auto& r = aliases.rows[i];
            auto alias = trim(r[c_alias]);
            auto canon = trim(r[c_canon]);
            if (alias.empty() || canon.empty())
                throw ConfigError(fmt::format("normalization map line {}: empty field", aliases.line_numbers[i]));
            auto [it, fresh] = m.alias_to_canonical.emplace(alias, canon);
            if (!fresh && it->second != canon)
                throw ConfigError(fmt::format("normalization map line {}: alias '{}' maps to both '{}' and '{}'",
                                              aliases.line_numbers[i], alias, it->second, canon));
        }
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    m.validate();
    return m;
}

NormalizationMap NormalizationMap::load(const std::filesystem::path& map_path,
                                        const std::filesystem::path& parties_path) {
    std::string map_text, parties_text;
    try {
        map_text = csv::read_file(map_path);
        parties_text = csv::read_file(parties_path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return parse(map_text, parties_text);
}

NormalizedSnapshot normalize_affiliations(const kg::Snapshot& snapshot, const NormalizationMap& map,
                                          const std::map<std::string, Date>& career_end) {
    std::map<std::pair<std::string, std::string>, std::string> party_labels;
    for (const auto& p : snapshot.parties)
        party_labels.emplace(std::pair{p.source, p.party_id}, p.label);

    std::map<std::pair<std::string, std::string>, PoliticianRecord> grouped;
    std::map<std::pair<std::string, std::string>, UnmappedRef> unmapped;
    NormalizedSnapshot out;

    for (const auto& row : snapshot.politicians) {
        auto& rec = grouped[{row.source, row.politician_id}];
        if (rec.id.empty()) {
            rec.source = row.source;
            rec.id = row.politician_id;
            if (auto it = career_end.find(row.politician_id); it != career_end.end())
                rec.career_end_override = it->second;
        }
        if (rec.label.empty())
            rec.label = row.label;
        if (auto death = opt_date(row.death_date); death && (!rec.death_date || *death < *rec.death_date))
            rec.death_date = death;

        Affiliation aff;
        aff.interval = {opt_date(row.aff_start), opt_date(row.aff_end)};
        if (!row.party_id.empty()) {
            ++out.party_refs;
            std::string label;
            if (auto it = party_labels.find({row.source, row.party_id}); it != party_labels.end())
                label = it->second;
            if (auto canonical = map.resolve(row.party_id, label)) {
                aff.party = *canonical;
                switch (map.party(*canonical)->relevance) {
                case Relevance::relevant: aff.status = PartyStatus::relevant; break;
                case Relevance::not_relevant: aff.status = PartyStatus::not_relevant; break;
                case Relevance::foreign: aff.status = PartyStatus::foreign; break;
                }
            } else {
                aff.party = row.party_id;
                aff.status = PartyStatus::unmapped;
                auto& u = unmapped[{row.source, row.party_id}];
                u.source = row.source;
                u.raw_ref = row.party_id;
                u.label = label;
                ++u.rows;
            }
        }
        if (std::find(rec.affiliations.begin(), rec.affiliations.end(), aff) == rec.affiliations.end())
            rec.affiliations.push_back(std::move(aff));
    }

    for (auto& [key, rec] : grouped) {
        std::sort(rec.affiliations.begin(), rec.affiliations.end(), [](const Affiliation& a, const Affiliation& b) {
            return std::tie(a.interval.start, a.interval.end, a.party) < std::tie(b.interval.start, b.interval.end, b.party);
        });
        out.politicians.push_back(std::move(rec));
    }
    for (auto& [key, u] : unmapped)
        out.unmapped.push_back(std::move(u));
    return out;
}

// ---------------------------------------------------------------------------
// Activity and bounds

std::optional<DateInterval> activity_period(const PoliticianRecord& p, Date today) {
    std::optional<Date> lo, hi;
    bool open = false;
    auto take = [&](const std::optional<Date>& d) {
        if (!d)
            return;
        if (!lo || *d < *lo)
            lo = d;
        if (!hi || *hi < *d)
            hi = d;
    };
    for (const auto& a : p.affiliations) {
        take(a.interval.start);
        take(a.interval.end);
        if (a.interval.start && !a.interval.end)
            open = true;
    }
    if (!lo)
        return std::nullopt;

    Date cap = today;
    if (p.death_date && *p.death_date < cap)
        cap = *p.death_date;
    if (p.career_end_override && *p.career_end_override < cap)
        cap = *p.career_end_override;

    Date end = (open || cap < *hi) ? cap : *hi;
    if (end < *lo)
        return std::nullopt;
    return DateInterval{lo, end};
}

std::vector<const PoliticianRecord*> select_active(std::span<const PoliticianRecord> politicians, Date t, Date today) {
    std::vector<const PoliticianRecord*> out;
    for (const auto& p : politicians)
        if (auto period = activity_period(p, today); period && period->contains(t))
            out.push_back(&p);
    return out;
}

std::vector<VisibilityBounds> compute_bounds(std::span<const PoliticianRecord* const> active, Date t,
                                             std::span<const std::string> parties) {
    std::vector<VisibilityBounds> out;
    if (active.empty())
        return out;
    std::vector<std::vector<std::string>> careers;
    careers.reserve(active.size());
    for (const auto* p : active)
        careers.push_back(p->relevant_parties());

    const auto total = static_cast<double>(active.size());
    for (const auto& party : parties) {
        VisibilityBounds b;
        b.canonical_acronym = party;
        b.time_point = t;
        b.active_total = active.size();
        for (const auto& c : careers) {
            if (std::binary_search(c.begin(), c.end(), party)) {
                ++b.upper_count;
                if (c.size() == 1)
                    ++b.lower_count;
            }
        }
        b.lower_share = static_cast<double>(b.lower_count) / total;
        b.upper_share = static_cast<double>(b.upper_count) / total;
        out.push_back(std::move(b));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Baselines

void BaselineTable::validate() const {
    if (elections.empty())
        throw DataError(fmt::format("baseline body '{}' has no elections", body));
    for (const auto& [date, e] : elections) {
        if (e.total_seats == 0)
            throw DataError(fmt::format("baseline {} {}: total_seats must be positive", body, to_iso(date)));
        std::uint64_t sum = 0;
        for (const auto& [party, seats] : e.seats)
            sum += seats;
        if (sum > e.total_seats)
            throw DataError(fmt::format("baseline {} {}: {} party seats exceed the {} total", body, to_iso(date), sum,
                                        e.total_seats));
    }
}

std::map<std::string, BaselineTable> parse_baselines(std::string_view text, std::string_view what) {
    auto table = csv::parse_table(text, what);
    table.require_columns({"body", "election_date", "canonical_acronym", "seats", "total_seats"}, what);
    auto c_body = table.column("body");
    auto c_date = table.column("election_date");
    auto c_party = table.column("canonical_acronym");
    auto c_seats = table.column("seats");
    auto c_total = table.column("total_seats");

    auto number = [&](const std::string& s, std::size_t line, std::string_view col) {
        auto t = trim(s);
        if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
            throw DataError(fmt::format("{} line {}: {} '{}' is not a non-negative integer", what, line, col, s));
        return std::stoull(t);
    };

    std::map<std::string, BaselineTable> out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        const auto line = table.line_numbers[i];
        auto body = trim(r[c_body]);
        auto party = trim(r[c_party]);
        if (body.empty() || party.empty())
            throw DataError(fmt::format("{} line {}: body and canonical_acronym are required", what, line));
        auto date = require_iso_date(trim(r[c_date]), fmt::format("{} line {} election_date", what, line));
        auto seats = number(r[c_seats], line, "seats");
        auto total = number(r[c_total], line, "total_seats");

        auto& t = out[body];
        t.body = body;
        auto& e = t.elections[date];
        if (e.total_seats != 0 && e.total_seats != total)
            throw DataError(fmt::format("{} line {}: total_seats differs from earlier rows of this election", what, line));
        e.total_seats = total;
        if (!e.seats.emplace(party, seats).second)
            throw DataError(fmt::format("{} line {}: '{}' listed twice for {} {}", what, line, party, body, to_iso(date)));
    }
    for (const auto& [body, t] : out)
        t.validate();
    return out;
}

std::map<std::string, BaselineTable> load_baselines(const std::filesystem::path& path) {
    return parse_baselines(csv::read_file(path), path.string());
}

std::string_view to_string(BaselinePolicy p) {
    return p == BaselinePolicy::most_recent_preceding ? "preceding" : "closest";
}

std::optional<BaselinePolicy> parse_baseline_policy(std::string_view s) {
    if (s == "preceding" || s == "most-recent-preceding")
        return BaselinePolicy::most_recent_preceding;
    if (s == "closest" || s == "closest-in-time")
        return BaselinePolicy::closest_in_time;
    return std::nullopt;
}

std::optional<Date> select_election(const BaselineTable& table, Date t, BaselinePolicy policy) {
    if (policy == BaselinePolicy::most_recent_preceding) {
        auto it = table.elections.upper_bound(t);
        if (it == table.elections.begin())
            return std::nullopt;
        return std::prev(it)->first;
    }
    std::optional<Date> best;
    long best_gap = 0;
    for (const auto& [date, e] : table.elections) {
        long gap = std::abs(days_between(date, t));
        if (!best || gap < best_gap) {
            best = date;
            best_gap = gap;
        }
    }
    return best;
}

double baseline_share(const BaselineTable& table, std::string_view party, Date t, BaselinePolicy policy) {
    auto date = select_election(table, t, policy);
    if (!date)
        throw DataError(fmt::format("no {} election on or before {}", table.body, to_iso(t)));
    const auto& e = table.elections.at(*date);
    auto it = e.seats.find(std::string(party));
    if (it == e.seats.end())
        return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(e.total_seats);
}

// ---------------------------------------------------------------------------
// Verdicts

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::over: return "over";
    case Verdict::under: return "under";
    case Verdict::indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

std::optional<Verdict> parse_verdict(std::string_view s) {
    for (auto v : {Verdict::over, Verdict::under, Verdict::indeterminate})
        if (s == to_string(v))
            return v;
    return std::nullopt;
}

RepresentationVerdict classify(const VisibilityBounds& bounds, double baseline) {
    RepresentationVerdict v;
    v.canonical_acronym = bounds.canonical_acronym;
    v.time_point = bounds.time_point;
    v.baseline_share = baseline;
    v.bounds = bounds;
    if (bounds.lower_share > baseline)
        v.verdict = Verdict::over;
    else if (bounds.upper_share < baseline)
        v.verdict = Verdict::under;
    else
        v.verdict = Verdict::indeterminate;
    return v;
}

// ---------------------------------------------------------------------------
// Audit

AuditResult run_audit(const kg::Snapshot& snapshot, const NormalizationMap& map, const BaselineTable& baseline,
                      std::span<const Date> schedule_in, const AuditOptions& options) {
    AuditResult result;
    auto normalized = normalize_affiliations(snapshot, map, options.career_end);
    result.unmapped = normalized.unmapped;
    result.party_refs = normalized.party_refs;

    std::vector<Date> schedule(schedule_in.begin(), schedule_in.end());
    std::sort(schedule.begin(), schedule.end());
    schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());

    std::vector<std::string> relevant;
    for (const auto& [acr, party] : map.canonical_to_party)
        if (party.relevance == Relevance::relevant)
            relevant.push_back(acr);
    std::stable_sort(relevant.begin(), relevant.end(), [&](const std::string& a, const std::string& b) {
        return std::tie(map.canonical_to_party.at(a).alignment, a) < std::tie(map.canonical_to_party.at(b).alignment, b);
    });

    std::map<std::string, std::optional<Date>> latest_retrieval;
    for (const auto& row : snapshot.politicians) {
        auto& latest = latest_retrieval[row.source];
        if (auto d = parse_iso_date(row.retrieved_at); d && (!latest || *latest < *d))
            latest = d;
    }
    if (latest_retrieval.empty())
        result.notes.push_back("snapshot holds no politicians: 0 active actors at every time point");

    auto begin = normalized.politicians.begin();
    for (const auto& [source, latest] : latest_retrieval) {
        auto end = std::find_if(begin, normalized.politicians.end(),
                                [&](const PoliticianRecord& p) { return p.source != source; });
        std::span<const PoliticianRecord> politicians(&*begin, static_cast<std::size_t>(end - begin));
        begin = end;

        const Date today = options.today ? *options.today : latest ? *latest : system_today();
        std::size_t undated = 0;
        for (const auto& p : politicians)
            if (!activity_period(p, today))
                ++undated;

        std::map<std::string, std::vector<AuditRow>> per_party;
        for (auto t : schedule) {
            auto active = select_active(politicians, t, today);
            result.coverage.push_back({source, t, active.size(), undated, active.size() < kLowSampleThreshold});
            if (!select_election(baseline, t, options.policy)) {
                result.notes.push_back(fmt::format("{} {}: skipped, no {} election on or before this date", source,
                                                   to_iso(t), baseline.body));
                continue;
            }
            if (active.empty()) {
                result.notes.push_back(fmt::format("{} {}: no active politicians", source, to_iso(t)));
                continue;
            }
            for (const auto& b : compute_bounds(active, t, relevant)) {
                auto v = classify(b, baseline_share(baseline, b.canonical_acronym, t, options.policy));
                per_party[b.canonical_acronym].push_back({source, t, b.canonical_acronym,
                                                          map.canonical_to_party.at(b.canonical_acronym).alignment,
                                                          b.lower_count, b.upper_count, b.lower_share, b.upper_share,
                                                          v.baseline_share, v.verdict, b.active_total});
            }
        }
        for (const auto& party : relevant) {
            auto it = per_party.find(party);
            if (it == per_party.end())
                continue;
            bool shown = std::any_of(it->second.begin(), it->second.end(),
                                     [](const AuditRow& r) { return r.upper_count > 0 || r.baseline_share > 0; });
            if (shown)
                result.rows.insert(result.rows.end(), it->second.begin(), it->second.end());
        }
    }
    return result;
}

std::vector<Finding> validate_snapshot(const kg::Snapshot& snapshot, const NormalizationMap* map) {
    std::set<Finding> findings;

    std::map<std::string, std::set<std::string>> party_ids;
    std::map<std::pair<std::string, std::string>, std::string> party_labels;
    for (const auto& p : snapshot.parties) {
        party_ids[p.source].insert(p.party_id);
        party_labels.emplace(std::pair{p.source, p.party_id}, p.label);
    }
    for (const auto& r : snapshot.politicians)
        if (!r.party_id.empty())
            party_ids[r.source].insert(r.party_id);

    auto label_of = [&](const kg::PoliticianRow& r) -> std::string {
        auto it = party_labels.find({r.source, r.party_id});
        return it == party_labels.end() ? std::string{} : it->second;
    };
    std::map<std::pair<std::string, std::string>, bool> has_relevant;
    for (const auto& r : snapshot.politicians) {
        if (party_ids[r.source].contains(r.politician_id))
            findings.insert({"type-conflict", r.source, r.politician_id,
                             "appears both as a politician and as a party"});

        auto start = parse_iso_date(r.aff_start);
        auto end = parse_iso_date(r.aff_end);
        auto death = parse_iso_date(r.death_date);
        if (start && end && *end < *start)
            findings.insert({"inverted-interval", r.source, r.politician_id,
                             fmt::format("affiliation {} runs from {} to {}", r.party_id, r.aff_start, r.aff_end)});
        if (death && start && *death < *start)
            findings.insert({"death-before-start", r.source, r.politician_id,
                             fmt::format("died {} before affiliation {} started {}", r.death_date, r.party_id,
                                         r.aff_start)});

        bool relevant = false;
        if (!r.party_id.empty()) {
            if (!map) {
                relevant = true;
            } else if (auto canonical = map->resolve(r.party_id, label_of(r))) {
                relevant = map->party(*canonical)->relevance == Relevance::relevant;
            }
        }
        auto& flag = has_relevant[{r.source, r.politician_id}];
        flag = flag || relevant;
    }
    for (const auto& [key, relevant] : has_relevant)
        if (!relevant)
            findings.insert({"no-relevant-affiliation", key.first, key.second,
                             map ? "no affiliation with a relevant party" : "no party affiliation"});
    return {findings.begin(), findings.end()};
}

} // namespace kgdiv::audit
