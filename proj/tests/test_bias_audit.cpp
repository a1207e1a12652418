#include <doctest.h>

#include "audit_gen.hpp"
#include "kgdiv/bias_audit.hpp"
#include "support.hpp"

using namespace kgdiv;
using namespace kgdiv::audit;
using kgdiv::testing::fixture;
using kgdiv::testing::slurp;

namespace {

Date ymd(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

Affiliation aff(std::string party, std::optional<Date> s, std::optional<Date> e,
                PartyStatus st = PartyStatus::relevant) {
    return {std::move(party), {s, e}, st};
}

PoliticianRecord politician(std::string id, std::vector<Affiliation> affs) {
    PoliticianRecord p;
    p.source = "test";
    p.id = std::move(id);
    p.affiliations = std::move(affs);
    return p;
}

const char* kParties = "canonical_acronym,alignment,relevance\n"
                       "A,left,relevant\n"
                       "B,right,relevant\n"
                       "N-VA,right,relevant\n"
                       "Z,other,not-relevant\n"
                       "CDU,centre-right,foreign\n";
const char* kAliases = "alias,canonical_acronym\n"
                       "Volksunie,N-VA\n"
                       "Nieuw-Vlaamse Alliantie,N-VA\n"
                       "Minor,Z\n"
                       "Christlich Demokratische Union,CDU\n";

NormalizationMap small_map() {
    return NormalizationMap::parse(kAliases, kParties);
}

kg::PoliticianRow row(std::string id, std::string party, std::string s, std::string e, std::string death = "") {
    return {"test", std::move(id), "", std::move(party), std::move(s), std::move(e), std::move(death), "", "2021-10-01"};
}

BaselineTable table_ab() {
    return parse_baselines(slurp(fixture("synthetic/baselines.csv"))).at("TEST");
}

} // namespace

TEST_SUITE("bias_audit") {

TEST_CASE("alignment and relevance vocabularies") {
    CHECK(all_alignments().size() == 9);
    CHECK(parse_alignment("Centre-Left") == Alignment::centre_left);
    CHECK(parse_alignment("center right") == Alignment::centre_right);
    CHECK(parse_alignment("extreme_right") == Alignment::extreme_right);
    CHECK_FALSE(parse_alignment("far-left"));
    CHECK(to_string(Alignment::extreme_left) == "extreme-left");
    CHECK(parse_relevance("not-relevant") == Relevance::not_relevant);
    CHECK_FALSE(parse_relevance("maybe"));
}

TEST_CASE("normalization map resolution and validation") {
    auto m = small_map();
    CHECK(m.resolve("Volksunie") == "N-VA");
    CHECK(m.resolve("N-VA") == "N-VA");
    CHECK(m.resolve("http://dbpedia.org/resource/Nieuw-Vlaamse_Alliantie") == "N-VA");
    CHECK(m.resolve("http://www.wikidata.org/entity/Q12", "Volksunie") == "N-VA");
    CHECK_FALSE(m.resolve("http://www.wikidata.org/entity/Q12"));

    CHECK_THROWS_AS(NormalizationMap::parse("alias,canonical_acronym\nX,NOPE\n", kParties), ConfigError);
    CHECK_THROWS_AS(NormalizationMap::parse("alias,canonical_acronym\nX,A\nX,B\n", kParties), ConfigError);
    CHECK_THROWS_AS(NormalizationMap::parse(kAliases, "canonical_acronym,alignment,relevance\nA,sideways,relevant\n"),
                    ConfigError);
}

TEST_CASE("bundled belgian map is consistent") {
    auto dir = std::filesystem::path(KGDIV_DATA_DIR) / "belgium";
    auto m = NormalizationMap::load(dir / "party_map.csv", dir / "party_classes.csv");
    CHECK(m.resolve("Volksunie") == "N-VA");
    CHECK(m.party("N-VA")->alignment == Alignment::right);
    auto baselines = load_baselines(dir / "baselines.csv");
    for (const auto& [body, table] : baselines)
        for (const auto& [date, election] : table.elections)
            for (const auto& [acr, seats] : election.seats)
                CHECK_MESSAGE(m.party(acr), body, " ", to_iso(date), " ", acr);
}

TEST_CASE("normalize collapses aliases, flags and merges") {
    kg::Snapshot snap;
    snap.politicians = {
        row("x", "Volksunie", "1995-01-01", "2001-12-31"),
        row("x", "N-VA", "2002-01-01", ""),
        row("y", "Minor", "2000-01-01", ""),
        row("z", "A", "2000-01-01", "2004-01-01"),
        row("z", "A", "2000-01-01", "2004-01-01"),
        row("w", "Lijst Nergens", "2000-01-01", ""),
    };
    auto n = normalize_affiliations(snap, small_map());
    REQUIRE(n.politicians.size() == 4);
    auto find = [&](const std::string& id) {
        return *std::find_if(n.politicians.begin(), n.politicians.end(), [&](auto& p) { return p.id == id; });
    };
    CHECK(find("x").relevant_parties() == std::vector<std::string>{"N-VA"});
    CHECK(find("x").affiliations.size() == 2);
    CHECK(find("y").affiliations.at(0).status == PartyStatus::not_relevant);
    CHECK(find("y").relevant_parties().empty());
    CHECK(find("z").affiliations.size() == 1);
    CHECK(find("w").affiliations.at(0).status == PartyStatus::unmapped);
    REQUIRE(n.unmapped.size() == 1);
    CHECK(n.unmapped[0].raw_ref == "Lijst Nergens");
    CHECK(n.party_refs == 6);
}

TEST_CASE("activity period examples") {
    auto p = politician("p", {aff("A", january_first(1995), january_first(2003)), aff("A", january_first(2001), {})});
    p.death_date = ymd(2010, 6, 1);
    CHECK(activity_period(p, ymd(2022, 1, 1)) == DateInterval{january_first(1995), ymd(2010, 6, 1)});

    auto q = politician("q", {aff("A", january_first(2018), {})});
    CHECK(activity_period(q, ymd(2022, 5, 1)) == DateInterval{january_first(2018), ymd(2022, 5, 1)});

    auto r = politician("r", {aff("A", {}, {})});
    CHECK_FALSE(activity_period(r, ymd(2022, 5, 1)));

    auto s = politician("s", {aff("A", january_first(2000), january_first(2015))});
    s.career_end_override = january_first(2012);
    CHECK(activity_period(s, ymd(2022, 1, 1))->end == january_first(2012));
}

TEST_CASE("active at T uses inclusive endpoints") {
    std::vector<PoliticianRecord> ps{politician("p", {aff("A", january_first(1995), january_first(2010))}),
                                     politician("edge", {aff("A", january_first(1995), january_first(2000))})};
    auto today = january_first(2022);
    CHECK(select_active(ps, january_first(2000), today).size() == 2);
    CHECK(select_active(ps, january_first(2011), today).empty());
    CHECK(select_active(ps, january_first(1995), today).size() == 2);
    CHECK(select_active(ps, ymd(1994, 12, 31), today).empty());
}

TEST_CASE("bounds hand example") {
    std::vector<PoliticianRecord> ps{
        politician("p1", {aff("A", january_first(2000), {})}),
        politician("p2", {aff("A", january_first(2000), {})}),
        politician("p3", {aff("A", january_first(2000), january_first(2005)), aff("B", january_first(2006), {})}),
        politician("p4", {aff("B", january_first(2000), {})}),
    };
    auto t = january_first(2010);
    auto active = select_active(ps, t, january_first(2022));
    std::vector<std::string> parties{"A", "B"};
    auto b = compute_bounds(active, t, parties);
    REQUIRE(b.size() == 2);
    CHECK(b[0].lower_count == 2);
    CHECK(b[0].upper_count == 3);
    CHECK(b[0].lower_share == 0.5);
    CHECK(b[0].upper_share == 0.75);
    CHECK(b[1].lower_count == 1);
    CHECK(b[1].upper_count == 2);
    CHECK(b[1].active_total == 4);
}

TEST_CASE("non-relevant careers count in the denominator only") {
    std::vector<PoliticianRecord> ps{
        politician("a", {aff("A", january_first(2000), {})}),
        politician("z", {aff("Z", january_first(2000), {}, PartyStatus::not_relevant)}),
        politician("az", {aff("A", january_first(2000), {}), aff("Z", january_first(2001), {}, PartyStatus::not_relevant)}),
    };
    auto active = select_active(ps, january_first(2010), january_first(2022));
    std::vector<std::string> parties{"A"};
    auto b = compute_bounds(active, january_first(2010), parties);
    CHECK(b[0].active_total == 3);
    CHECK(b[0].lower_count == 2);
    CHECK(b[0].upper_count == 2);
    CHECK(compute_bounds({}, january_first(2010), parties).empty());
}

TEST_CASE("single-party snapshots have equal bounds") {
    std::vector<PoliticianRecord> ps{politician("a", {aff("A", january_first(2000), {})}),
                                     politician("b", {aff("B", january_first(2000), {})}),
                                     politician("b2", {aff("B", january_first(2001), {})})};
    auto active = select_active(ps, january_first(2010), january_first(2022));
    std::vector<std::string> parties{"A", "B"};
    for (const auto& b : compute_bounds(active, january_first(2010), parties))
        CHECK(b.lower_count == b.upper_count);
}

TEST_CASE("baseline share and election policies") {
    auto vp = load_baselines(std::filesystem::path(KGDIV_DATA_DIR) / "belgium/baselines.csv").at("VP");
    CHECK(baseline_share(vp, "N-VA", january_first(2020), BaselinePolicy::most_recent_preceding) ==
          doctest::Approx(35.0 / 124.0));
    CHECK(baseline_share(vp, "PVDA-PTB-nonexistent", january_first(2020), BaselinePolicy::most_recent_preceding) == 0.0);

    BaselineTable t;
    t.body = "X";
    t.elections[january_first(2000)] = {{{"A", 10}}, 100};
    t.elections[january_first(2008)] = {{{"A", 30}}, 100};
    auto mid = add_days(january_first(2000), days_between(january_first(2000), january_first(2008)) / 2);
    REQUIRE(days_between(january_first(2000), mid) == days_between(mid, january_first(2008)));
    CHECK(select_election(t, mid, BaselinePolicy::closest_in_time) == january_first(2000));
    CHECK(select_election(t, add_days(mid, 1), BaselinePolicy::closest_in_time) == january_first(2008));
    CHECK(select_election(t, ymd(2007, 12, 31), BaselinePolicy::most_recent_preceding) == january_first(2000));
    CHECK(select_election(t, january_first(2008), BaselinePolicy::most_recent_preceding) == january_first(2008));
    CHECK_FALSE(select_election(t, january_first(1999), BaselinePolicy::most_recent_preceding));
    CHECK(select_election(t, january_first(1999), BaselinePolicy::closest_in_time) == january_first(2000));
    CHECK_THROWS_AS(baseline_share(t, "A", january_first(1999), BaselinePolicy::most_recent_preceding), DataError);

    CHECK(parse_baseline_policy("closest") == BaselinePolicy::closest_in_time);
    CHECK(parse_baseline_policy("preceding") == BaselinePolicy::most_recent_preceding);
}

TEST_CASE("baseline parsing rejects impossible tables") {
    const std::string head = "body,election_date,canonical_acronym,seats,total_seats\n";
    CHECK_THROWS_AS(parse_baselines(head + "X,2019-05-26,A,80,100\nX,2019-05-26,B,30,100\n"), DataError);
    CHECK_THROWS_AS(parse_baselines(head + "X,2019-05-26,A,0,0\n"), DataError);
    CHECK_THROWS_AS(parse_baselines(head + "X,2019-05-26,A,10,100\nX,2019-05-26,B,10,150\n"), DataError);
    CHECK_THROWS_AS(parse_baselines(head + "X,26/05/2019,A,10,100\n"), DataError);
    CHECK(parse_baselines(head).empty());
}

TEST_CASE("classify uses strict inequalities") {
    auto bounds = [](double lo, double hi) {
        VisibilityBounds b;
        b.canonical_acronym = "P";
        b.lower_share = lo;
        b.upper_share = hi;
        return b;
    };
    CHECK(classify(bounds(0.30, 0.40), 0.20).verdict == Verdict::over);
    CHECK(classify(bounds(0.05, 0.10), 0.20).verdict == Verdict::under);
    CHECK(classify(bounds(0.15, 0.25), 0.20).verdict == Verdict::indeterminate);
    CHECK(classify(bounds(0.20, 0.30), 0.20).verdict == Verdict::indeterminate);
    CHECK(classify(bounds(0.10, 0.20), 0.20).verdict == Verdict::indeterminate);
}

TEST_CASE("synthetic audit: A over, B under") {
    auto snap = kg::load_snapshot(fixture("synthetic"));
    auto map = NormalizationMap::load(fixture("synthetic/party_map.csv"), fixture("synthetic/party_classes.csv"));
    std::vector<Date> schedule{january_first(2010)};
    auto result = run_audit(snap, map, table_ab(), schedule);
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[0].canonical_acronym == "A");
    CHECK(result.rows[0].verdict == Verdict::over);
    CHECK(result.rows[0].baseline_share == doctest::Approx(0.4));
    CHECK(result.rows[1].canonical_acronym == "B");
    CHECK(result.rows[1].verdict == Verdict::under);
    REQUIRE(result.coverage.size() == 1);
    CHECK(result.coverage[0].active_total == 4);
    CHECK(result.coverage[0].low_sample);
}

TEST_CASE("empty snapshot audit") {
    kg::Snapshot empty;
    std::vector<Date> schedule{january_first(2010)};
    auto result = run_audit(empty, small_map(), table_ab(), schedule, {.today = january_first(2022)});
    CHECK(result.rows.empty());
    CHECK_FALSE(result.notes.empty());
}

TEST_CASE("run_audit is deterministic") {
    auto snap = kg::load_snapshot(fixture("sparql/e2e/expected"));
    auto dir = std::filesystem::path(KGDIV_DATA_DIR) / "belgium";
    auto map = NormalizationMap::load(dir / "party_map.csv", dir / "party_classes.csv");
    auto kvv = load_baselines(dir / "baselines.csv").at("KVV");
    auto schedule = default_schedule();
    auto a = run_audit(snap, map, kvv, schedule);
    auto b = run_audit(snap, map, kvv, schedule);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].canonical_acronym == b.rows[i].canonical_acronym);
        CHECK(a.rows[i].lower_share == b.rows[i].lower_share);
        CHECK(a.rows[i].upper_share == b.rows[i].upper_share);
        CHECK(a.rows[i].verdict == b.rows[i].verdict);
    }
    CHECK(a.notes == b.notes);
}

TEST_CASE("validate snapshot findings") {
    kg::Snapshot snap;
    snap.politicians = {
        row("http://e/WEP", "http://e/Dem", "2015-01-01", ""),
        row("inv", "A", "2005-01-01", "2001-01-01"),
        row("dead", "A", "2005-01-01", "", "2001-01-01"),
        row("minor", "Minor", "2005-01-01", ""),
        row("ok", "A", "2005-01-01", ""),
    };
    snap.parties = {{"test", "http://e/WEP", "Women's Equality Party", "", "", "2021-10-01"},
                    {"test", "http://e/Dem", "A", "", "", "2021-10-01"}};
    auto map = small_map();
    auto findings = validate_snapshot(snap, &map);
    std::set<std::pair<std::string, std::string>> kinds;
    for (const auto& f : findings)
        kinds.insert({f.kind, f.subject});
    CHECK(kinds.contains({"type-conflict", "http://e/WEP"}));
    CHECK(kinds.contains({"inverted-interval", "inv"}));
    CHECK(kinds.contains({"death-before-start", "dead"}));
    CHECK(kinds.contains({"no-relevant-affiliation", "minor"}));
    // http://e/Dem resolves through its party label
    CHECK_FALSE(kinds.contains({"no-relevant-affiliation", "http://e/WEP"}));
    CHECK(std::is_sorted(findings.begin(), findings.end()));

    kg::Snapshot clean;
    clean.politicians = {row("ok", "A", "2005-01-01", "")};
    CHECK(validate_snapshot(clean, &map).empty());
    CHECK(validate_snapshot(clean).empty());
}

TEST_CASE("property: bounds match the assignment enumeration and verdicts are sound") {
    testing::Rng rng(2024);
    for (int it = 0; it < 150; ++it) {
        auto in = testing::random_bounds_instance(rng);
        auto active = select_active(in.politicians, in.t, in.today);
        auto bounds = compute_bounds(active, in.t, in.parties);
        if (active.empty()) {
            CHECK(bounds.empty());
            continue;
        }
        std::vector<std::vector<std::string>> careers;
        for (const auto* p : active)
            careers.push_back(testing::career_parties(*p));

        std::vector<std::size_t> lo(in.parties.size(), SIZE_MAX), hi(in.parties.size(), 0);
        testing::enumerate_assignments(careers, in.parties, [&](const std::vector<std::size_t>& c) {
            for (std::size_t k = 0; k < c.size(); ++k) {
                lo[k] = std::min(lo[k], c[k]);
                hi[k] = std::max(hi[k], c[k]);
            }
        });
        std::size_t lower_sum = 0, upper_sum = 0, with_relevant = 0;
        for (const auto& c : careers)
            with_relevant += c.empty() ? 0 : 1;
        for (std::size_t k = 0; k < in.parties.size(); ++k) {
            CHECK(bounds[k].lower_count == lo[k]);
            CHECK(bounds[k].upper_count == hi[k]);
            CHECK(bounds[k].lower_count <= bounds[k].upper_count);
            CHECK(bounds[k].upper_count <= bounds[k].active_total);
            lower_sum += bounds[k].lower_count;
            upper_sum += bounds[k].upper_count;

            const double total = static_cast<double>(active.size());
            for (double baseline : {bounds[k].lower_share, bounds[k].upper_share, testing::uniform(rng, 0, 1)}) {
                auto v = classify(bounds[k], baseline).verdict;
                testing::enumerate_assignments(careers, in.parties, [&](const std::vector<std::size_t>& c) {
                    double share = static_cast<double>(c[k]) / total;
                    if (v == Verdict::over)
                        CHECK(share > baseline);
                    if (v == Verdict::under)
                        CHECK(share < baseline);
                });
            }
        }
        CHECK(lower_sum <= active.size());
        CHECK(upper_sum >= with_relevant);
    }
}

TEST_CASE("property: activity periods") {
    testing::Rng rng(77);
    for (int it = 0; it < 1000; ++it) {
        PoliticianRecord p;
        p.id = "p";
        int n = testing::uniform_int(rng, 0, 4);
        for (int i = 0; i < n; ++i) {
            std::optional<Date> s, e;
            if (testing::coin(rng, 0.85))
                s = testing::random_date(rng, 1970, 2015);
            if (testing::coin(rng, 0.6))
                e = s ? add_days(*s, testing::uniform_int(rng, 0, 6000)) : testing::random_date(rng, 1970, 2020);
            p.affiliations.push_back(aff("A", s, e));
        }
        if (testing::coin(rng, 0.3))
            p.death_date = testing::random_date(rng, 1990, 2025);
        if (testing::coin(rng, 0.3))
            p.career_end_override = testing::random_date(rng, 1990, 2025);
        Date today = testing::random_date(rng, 2015, 2025);
        auto period = activity_period(p, today);

        Date cap = today;
        if (p.death_date)
            cap = std::min(cap, *p.death_date);
        if (p.career_end_override)
            cap = std::min(cap, *p.career_end_override);
        if (!period) {
            for (int k = 0; k < 5; ++k)
                CHECK_FALSE(testing::oracle_active(p, testing::random_date(rng, 1965, 2026), today));
            continue;
        }
        REQUIRE(period->start);
        REQUIRE(period->end);
        CHECK(*period->start <= *period->end);
        CHECK(*period->end <= cap);
        for (const auto& a : p.affiliations) {
            if (a.interval.start)
                CHECK(*period->start <= *a.interval.start);
            if (a.interval.end && *a.interval.end <= cap)
                CHECK(*a.interval.end <= *period->end);
            if (a.interval.start && !a.interval.end)
                CHECK(*period->end == cap);
        }
        std::vector<PoliticianRecord> one{p};
        for (Date t : {*period->start, *period->end, add_days(*period->start, -1), add_days(*period->end, 1)}) {
            CHECK(select_active(one, t, today).size() == (period->contains(t) ? 1u : 0u));
            CHECK(testing::oracle_active(p, t, today) == period->contains(t));
        }
    }
}

} // TEST_SUITE
