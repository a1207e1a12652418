#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "kgdiv/report.hpp"
#include "support.hpp"
#include "svg_probe.hpp"

using namespace kgdiv;
using namespace kgdiv::report;
using audit::Alignment;
using kgdiv::testing::fixture;
using kgdiv::testing::slurp;

namespace {

audit::AuditRow arow(std::string source, int year, std::string party, Alignment al, std::size_t lo, std::size_t hi,
                     std::size_t total, double base) {
    audit::AuditRow r;
    r.source = std::move(source);
    r.time_point = january_first(year);
    r.canonical_acronym = std::move(party);
    r.alignment = al;
    r.lower_count = lo;
    r.upper_count = hi;
    r.active_total = total;
    r.lower_share = double(lo) / double(total);
    r.upper_share = double(hi) / double(total);
    r.baseline_share = base;
    r.verdict = audit::classify({r.canonical_acronym, r.time_point, lo, hi, r.lower_share, r.upper_share, total}, base).verdict;
    return r;
}

FigureSpec three_party_spec(RenderStyle style) {
    FigureSpec s;
    s.title = "synthetic: three parties";
    s.source = "synthetic";
    s.body = "TEST";
    s.style = style;
    s.time_points = {january_first(2000), january_first(2005), january_first(2010)};
    s.active_counts = {12, 25, 40};
    s.parties = {
        {"L", Alignment::left, {0.10, 0.20, 0.25}, {0.20, 0.25, 0.30}, {0.15, 0.15, 0.20}},
        {"C", Alignment::centre, {0.30, 0.30, 0.20}, {0.30, 0.35, 0.30}, {0.40, 0.35, 0.30}},
        {"R", Alignment::right, {0.40, 0.25, 0.30}, {0.50, 0.40, 0.45}, {0.30, 0.40, 0.35}},
    };
    return s;
}

} // namespace

TEST_SUITE("report") {

TEST_CASE("party ordering follows alignment, then acronym") {
    using audit::PartyRecord;
    auto ordered = order_parties({{"X", Alignment::right}, {"Y", Alignment::centre}, {"Z", Alignment::extreme_left}});
    CHECK(ordered[0].canonical_acronym == "Z");
    CHECK(ordered[1].canonical_acronym == "Y");
    CHECK(ordered[2].canonical_acronym == "X");

    auto centre = order_parties({{"OpenVLD", Alignment::centre}, {"CD&V", Alignment::centre}});
    CHECK(centre[0].canonical_acronym == "CD&V");

    auto last = order_parties({{"U", Alignment::unknown}, {"O", Alignment::other}, {"A", Alignment::extreme_right}});
    CHECK(last.back().canonical_acronym == "U");
}

TEST_CASE("series csv is sorted and byte deterministic") {
    std::vector<audit::AuditRow> rows{arow("test", 2010, "B", Alignment::right, 1, 2, 4, 0.6),
                                      arow("test", 2010, "A", Alignment::left, 2, 3, 4, 0.4)};
    auto a = emit_series_csv(rows);
    std::reverse(rows.begin(), rows.end());
    CHECK(emit_series_csv(rows) == a);
    CHECK(a == slurp(fixture("synthetic/expected_audit.csv")));
    CHECK(std::count(a.begin(), a.end(), '\n') == 3);
}

TEST_CASE("series csv round-trips and reports bad rows") {
    std::vector<audit::AuditRow> rows{arow("s", 2010, "A", Alignment::left, 2, 3, 4, 0.4),
                                      arow("s", 2015, "A", Alignment::left, 1, 1, 3, 0.5)};
    auto text = emit_series_csv(rows);
    auto back = parse_series_csv(text);
    REQUIRE(back.size() == 2);
    CHECK(emit_series_csv(back) == text);

    CHECK(parse_series_csv("").empty());
    auto header_only = text.substr(0, text.find('\n') + 1);
    CHECK(parse_series_csv(header_only).empty());

    auto bad = header_only + "s,2010-13-01,A,left,2,3,0.5,0.75,0.4,over,4\n" + "s,2010-01-01,A,left,5,3,0.5,0.75,1.4,over,4\n";
    try {
        parse_series_csv(bad);
        FAIL("expected SeriesParseError");
    } catch (const SeriesParseError& e) {
        REQUIRE(e.issues().size() >= 2);
        CHECK(e.issues()[0].line == 2);
        CHECK(e.issues().back().line == 3);
    }
    CHECK_THROWS_AS(parse_series_csv("a,b\n1,2\n"), DataError);
}

TEST_CASE("figures carry the csv party order") {
    std::vector<audit::AuditRow> rows;
    for (int y : {2000, 2010}) {
        rows.push_back(arow("s", y, "R", Alignment::right, 1, 1, 10, 0.2));
        rows.push_back(arow("s", y, "L", Alignment::left, 2, 3, 10, 0.3));
        rows.push_back(arow("t", y, "C", Alignment::centre, 2, 3, 10, 0.3));
    }
    auto figs = figures_from_rows(rows, "KVV", RenderStyle::line);
    REQUIRE(figs.size() == 2);
    CHECK(figs[0].source == "s");
    CHECK(figs[0].parties[0].acronym == "L");
    CHECK(figs[0].parties[1].acronym == "R");
    CHECK(figs[0].active_counts == std::vector<std::size_t>{10, 10});

    auto csv = emit_series_csv(rows);
    auto probe = testing::probe_svg(emit_figure_svg(figs[0]));
    std::vector<std::string> svg_order;
    for (const auto* b : probe.with_class("band"))
        svg_order.push_back(b->party);
    std::vector<std::string> csv_order;
    for (const auto& r : parse_series_csv(csv))
        if (r.source == "s" && (csv_order.empty() || csv_order.back() != r.canonical_acronym))
            csv_order.push_back(r.canonical_acronym);
    CHECK(svg_order == csv_order);
}

TEST_CASE("axis transform") {
    AxisTransform ax;
    ax.time_points = {january_first(2000), january_first(2010), january_first(2020)};
    ax.share_max = 0.5;
    CHECK(ax.x(0) == ax.left);
    CHECK(ax.x(2) == ax.right);
    CHECK(ax.y(0.0) == ax.bottom);
    CHECK(ax.y(0.5) == ax.top);
    for (double s : {0.0, 0.1, 0.333, 0.5})
        CHECK(ax.share_at(ax.y(s)) == doctest::Approx(s));
    ax.time_points.resize(1);
    CHECK(ax.x(0) == doctest::Approx((ax.left + ax.right) / 2));

    auto spec = three_party_spec(RenderStyle::line);
    CHECK(axis_for(spec).share_max == doctest::Approx(0.5));
    CHECK(axis_for(three_party_spec(RenderStyle::stacked)).share_max == 1.0);
}

TEST_CASE("band edges parse back to the shares") {
    auto spec = three_party_spec(RenderStyle::line);
    auto probe = testing::probe_svg(emit_figure_svg(spec));
    AxisTransform ax;
    ax.left = probe.plot_number("left");
    ax.right = probe.plot_number("right");
    ax.top = probe.plot_number("top");
    ax.bottom = probe.plot_number("bottom");
    ax.share_max = probe.plot_number("share-max");
    ax.time_points = spec.time_points;
    CHECK(probe.plot.at("style") == "line");

    for (const auto& p : spec.parties) {
        const auto* band = probe.find("band", p.acronym);
        REQUIRE(band);
        REQUIRE(band->points.size() == 2 * spec.time_points.size());
        const auto n = spec.time_points.size();
        for (std::size_t i = 0; i < n; ++i) {
            auto upper = band->points[i];
            auto lower = band->points[2 * n - 1 - i];
            CHECK(std::abs(upper.first - ax.x(i)) <= 0.01);
            CHECK(std::abs(upper.second - ax.y(p.upper[i])) <= 1.0);
            CHECK(std::abs(lower.second - ax.y(p.lower[i])) <= 1.0);
            CHECK(ax.share_at(lower.second) == doctest::Approx(p.lower[i]).epsilon(0.01));
        }
        const auto* base = probe.find("baseline", p.acronym);
        REQUIRE(base);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(base->points[i].second - ax.y(p.baseline[i])) <= 1.0);
    }
    auto counts = probe.with_class("active-count low-sample");
    REQUIRE(counts.size() == 1);
    CHECK(counts[0]->text == "12");
}

TEST_CASE("degenerate band is a single line") {
    auto spec = three_party_spec(RenderStyle::line);
    spec.parties.resize(1);
    spec.parties[0].upper = spec.parties[0].lower;
    auto probe = testing::probe_svg(emit_figure_svg(spec));
    auto lower = probe.find("bound-lower", "L")->points;
    auto upper = probe.find("bound-upper", "L")->points;
    CHECK(lower == upper);
}

TEST_CASE("stacked style stacks lower shares") {
    auto spec = three_party_spec(RenderStyle::stacked);
    auto probe = testing::probe_svg(emit_figure_svg(spec));
    CHECK(probe.plot.at("style") == "stacked");
    CHECK(probe.with_class("bound-upper stacked").size() == 3);
    AxisTransform ax;
    ax.share_max = 1.0;
    ax.time_points = spec.time_points;
    std::vector<double> floor(3, 0.0);
    for (const auto& p : spec.parties) {
        const auto* band = probe.find("band", p.acronym);
        REQUIRE(band);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(std::abs(band->points[i].second - ax.y(floor[i] + p.lower[i])) <= 1.0);
            CHECK(std::abs(band->points[5 - i].second - ax.y(floor[i])) <= 1.0);
            floor[i] += p.lower[i];
        }
    }
}

TEST_CASE("empty figure says no data") {
    FigureSpec empty;
    empty.title = "none";
    auto svg = emit_figure_svg(empty);
    auto probe = testing::probe_svg(svg);
    CHECK(probe.with_class("no-data").size() == 1);
    CHECK(probe.with_class("axis").size() == 2);
    CHECK(probe.with_class("band").empty());
}

TEST_CASE("invalid specs are rejected") {
    auto spec = three_party_spec(RenderStyle::line);
    std::swap(spec.parties[0], spec.parties[2]);
    CHECK_THROWS_AS(emit_figure_svg(spec), DataError);
    spec = three_party_spec(RenderStyle::line);
    spec.parties[0].upper[1] = 1.5;
    CHECK_THROWS_AS(emit_figure_svg(spec), DataError);
    spec = three_party_spec(RenderStyle::line);
    std::swap(spec.time_points[0], spec.time_points[1]);
    CHECK_THROWS_AS(emit_figure_svg(spec), DataError);
}

TEST_CASE("figure output matches the reviewed golden file") {
    for (auto [style, name] : {std::pair{RenderStyle::line, "three_party_line.svg"},
                               std::pair{RenderStyle::stacked, "three_party_stacked.svg"}}) {
        auto svg = emit_figure_svg(three_party_spec(style));
        CHECK(svg == emit_figure_svg(three_party_spec(style)));
        auto golden = fixture("report") / name;
        if (std::getenv("KGDIV_WRITE_GOLDEN"))
            testing::spit(golden, svg);
        CHECK(svg == slurp(golden));
    }
}

} // TEST_SUITE
