#include "kgdiv/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "kgdiv/csv.hpp"

namespace kgdiv::report {

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 420;

// One colour per alignment category, left to right.
constexpr std::string_view kPalette[] = {"#8b0000", "#d62728", "#ff7f0e", "#bcbd22", "#17becf",
                                         "#1f77b4", "#3b3b98", "#7f7f7f", "#c7c7c7"};

std::string_view colour(audit::Alignment a) {
    return kPalette[static_cast<std::size_t>(a)];
}

std::string share(double v) {
    return fmt::format("{:.6f}", v);
}

std::string coord(double v) {
    auto s = fmt::format("{:.2f}", v);
    return s == "-0.00" ? "0.00" : s;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

bool row_before(const audit::AuditRow& a, const audit::AuditRow& b) {
    return std::tie(a.source, a.alignment, a.canonical_acronym, a.time_point) <
           std::tie(b.source, b.alignment, b.canonical_acronym, b.time_point);
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string points(const std::vector<std::pair<double, double>>& pts) {
    std::string out;
    for (const auto& [x, y] : pts) {
        if (!out.empty())
            out.push_back(' ');
        out += coord(x) + "," + coord(y);
    }
    return out;
}

} // namespace

std::vector<audit::PartyRecord> order_parties(std::vector<audit::PartyRecord> parties) {
    std::stable_sort(parties.begin(), parties.end(), [](const audit::PartyRecord& a, const audit::PartyRecord& b) {
        return std::tie(a.alignment, a.canonical_acronym) < std::tie(b.alignment, b.canonical_acronym);
    });
    return parties;
}

const std::vector<std::string>& series_columns() {
    static const std::vector<std::string> cols = {"source",      "time_point",  "canonical_acronym", "alignment",
                                                  "lower_count", "upper_count", "lower_share",       "upper_share",
                                                  "baseline_share", "verdict",  "active_total"};
    return cols;
}

std::string emit_series_csv(std::span<const audit::AuditRow> rows_in) {
    std::vector<audit::AuditRow> rows(rows_in.begin(), rows_in.end());
    std::stable_sort(rows.begin(), rows.end(), row_before);
    std::vector<csv::Row> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back({r.source, to_iso(r.time_point), r.canonical_acronym, std::string(to_string(r.alignment)),
                       std::to_string(r.lower_count), std::to_string(r.upper_count), share(r.lower_share),
                       share(r.upper_share), share(r.baseline_share), std::string(to_string(r.verdict)),
                       std::to_string(r.active_total)});
    return csv::format_table(series_columns(), out);
}

SeriesParseError::SeriesParseError(std::string what, std::vector<RowIssue> issues)
    : DataError(std::move(what)), issues_(std::move(issues)) {}

std::vector<audit::AuditRow> parse_series_csv(std::string_view text, std::string_view what) {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
        return {};
    auto table = csv::parse_table(text, what);
    table.require_columns(series_columns(), what);
    std::vector<std::size_t> col;
    for (const auto& name : series_columns())
        col.push_back(table.column(name));

    std::vector<RowIssue> issues;
    std::vector<audit::AuditRow> rows;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        const auto line = table.line_numbers[i];
        std::vector<std::string> problems;
        audit::AuditRow row;

        row.source = r[col[0]];
        if (row.source.empty())
            problems.push_back("empty source");
        if (auto d = parse_iso_date(r[col[1]]))
            row.time_point = *d;
        else
            problems.push_back(fmt::format("time_point '{}' is not YYYY-MM-DD", r[col[1]]));
        row.canonical_acronym = r[col[2]];
        if (row.canonical_acronym.empty())
            problems.push_back("empty canonical_acronym");
        if (auto a = audit::parse_alignment(r[col[3]]))
            row.alignment = *a;
        else
            problems.push_back(fmt::format("unknown alignment '{}'", r[col[3]]));
        if (!parse_number(r[col[4]], row.lower_count))
            problems.push_back(fmt::format("lower_count '{}' is not a count", r[col[4]]));
        if (!parse_number(r[col[5]], row.upper_count))
            problems.push_back(fmt::format("upper_count '{}' is not a count", r[col[5]]));
        for (auto [c, target, name] : {std::tuple{col[6], &row.lower_share, "lower_share"},
                                       std::tuple{col[7], &row.upper_share, "upper_share"},
                                       std::tuple{col[8], &row.baseline_share, "baseline_share"}}) {
            if (!parse_number(r[c], *target) || !(*target >= 0.0 && *target <= 1.0))
                problems.push_back(fmt::format("{} '{}' is not a share in [0, 1]", name, r[c]));
        }
        if (auto v = audit::parse_verdict(r[col[9]]))
            row.verdict = *v;
        else
            problems.push_back(fmt::format("unknown verdict '{}'", r[col[9]]));
        if (!parse_number(r[col[10]], row.active_total))
            problems.push_back(fmt::format("active_total '{}' is not a count", r[col[10]]));
        if (problems.empty() && !(row.lower_count <= row.upper_count && row.upper_count <= row.active_total))
            problems.push_back("counts violate lower_count <= upper_count <= active_total");

        if (problems.empty())
            rows.push_back(std::move(row));
        else
            for (auto& p : problems)
                issues.push_back({line, std::move(p)});
    }
    if (!issues.empty()) {
        std::string msg = fmt::format("{}: {} problem(s)", what, issues.size());
        for (const auto& is : issues)
            msg += fmt::format("\n  line {}: {}", is.line, is.message);
        throw SeriesParseError(std::move(msg), std::move(issues));
    }
    return rows;
}

void FigureSpec::validate() const {
    if (!std::is_sorted(time_points.begin(), time_points.end()) ||
        std::adjacent_find(time_points.begin(), time_points.end()) != time_points.end())
        throw DataError(fmt::format("figure '{}': time points must be strictly ascending", title));
    if (active_counts.size() != time_points.size())
        throw DataError(fmt::format("figure '{}': one active count per time point expected", title));
    for (const auto& p : parties) {
        for (const auto* v : {&p.lower, &p.upper, &p.baseline}) {
            if (v->size() != time_points.size())
                throw DataError(fmt::format("figure '{}': party {} lacks values for some time points", title, p.acronym));
            for (double s : *v)
                if (!(s >= 0.0 && s <= 1.0))
                    throw DataError(fmt::format("figure '{}': party {} has share {} outside [0, 1]", title, p.acronym, s));
        }
    }
    for (std::size_t i = 1; i < parties.size(); ++i)
        if (std::tie(parties[i].alignment, parties[i].acronym) < std::tie(parties[i - 1].alignment, parties[i - 1].acronym))
            throw DataError(fmt::format("figure '{}': parties are not in alignment order", title));
}

std::vector<FigureSpec> figures_from_rows(std::span<const audit::AuditRow> rows_in, std::string_view body,
                                          RenderStyle style) {
    std::vector<audit::AuditRow> rows(rows_in.begin(), rows_in.end());
    std::stable_sort(rows.begin(), rows.end(), row_before);

    std::vector<FigureSpec> out;
    for (auto it = rows.begin(); it != rows.end();) {
        auto end = std::find_if(it, rows.end(), [&](const audit::AuditRow& r) { return r.source != it->source; });
        FigureSpec spec;
        spec.source = it->source;
        spec.body = std::string(body);
        spec.title = fmt::format("{}: party shares among active politicians vs. {} seats", spec.source, spec.body);
        spec.style = style;

        std::map<Date, std::size_t> active;
        for (auto r = it; r != end; ++r)
            active[r->time_point] = r->active_total;
        for (const auto& [t, n] : active) {
            spec.time_points.push_back(t);
            spec.active_counts.push_back(n);
        }
        for (auto r = it; r != end;) {
            auto pend = std::find_if(r, end, [&](const audit::AuditRow& x) { return x.canonical_acronym != r->canonical_acronym; });
            PartySeries ps;
            ps.acronym = r->canonical_acronym;
            ps.alignment = r->alignment;
            ps.lower.assign(spec.time_points.size(), 0.0);
            ps.upper.assign(spec.time_points.size(), 0.0);
            ps.baseline.assign(spec.time_points.size(), 0.0);
            for (auto x = r; x != pend; ++x) {
                auto idx = static_cast<std::size_t>(std::distance(active.begin(), active.find(x->time_point)));
                ps.lower[idx] = x->lower_share;
                ps.upper[idx] = x->upper_share;
                ps.baseline[idx] = x->baseline_share;
            }
            spec.parties.push_back(std::move(ps));
            r = pend;
        }
        out.push_back(std::move(spec));
        it = end;
    }
    return out;
}

double AxisTransform::x(std::size_t i) const {
    if (time_points.size() <= 1)
        return (left + right) / 2;
    auto span = static_cast<double>(days_between(time_points.front(), time_points.back()));
    auto at = static_cast<double>(days_between(time_points.front(), time_points[i]));
    return left + (right - left) * at / span;
}

double AxisTransform::y(double s) const {
    return bottom - (bottom - top) * s / share_max;
}

double AxisTransform::share_at(double y_coord) const {
    return (bottom - y_coord) / (bottom - top) * share_max;
}

AxisTransform axis_for(const FigureSpec& spec) {
    AxisTransform ax;
    ax.time_points = spec.time_points;
    if (spec.style == RenderStyle::stacked) {
        ax.share_max = 1.0;
        return ax;
    }
    double top = 0.0;
    for (const auto& p : spec.parties)
        for (const auto* v : {&p.upper, &p.baseline})
            for (double s : *v)
                top = std::max(top, s);
    // Round up to the next tenth so grid lines land on round numbers.
    ax.share_max = std::clamp(std::ceil(top * 10.0 - 1e-9) / 10.0, 0.1, 1.0);
    return ax;
}

std::string emit_figure_svg(const FigureSpec& spec) {
    spec.validate();
    const auto ax = axis_for(spec);
    const bool empty = spec.parties.empty() || spec.time_points.empty();
    const bool stacked = spec.style == RenderStyle::stacked;

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" "
                     "viewBox=\"0 0 {} {}\">\n",
                     kWidth, kHeight, kWidth, kHeight);
    s += fmt::format("<title>{}</title>\n", xml_escape(spec.title));
    s += "<style>.band{stroke:none;fill-opacity:0.35}.bound-lower,.bound-upper{fill:none;stroke-width:2.5}"
         ".bound-upper.stacked{stroke-dasharray:4 3;stroke-width:1.5}.baseline{fill:none;stroke-width:1}"
         "text{font-family:sans-serif;font-size:11px}.title{font-size:13px}.axis{stroke:#000;stroke-width:1}"
         ".grid{stroke:#ddd;stroke-width:1}.low-sample{fill:#b00}</style>\n";
    s += fmt::format("<text class=\"title\" x=\"{}\" y=\"24\">{}</text>\n", coord(ax.left), xml_escape(spec.title));
    s += fmt::format("<g class=\"plot\" data-source=\"{}\" data-body=\"{}\" data-style=\"{}\" data-left=\"{}\" "
                     "data-right=\"{}\" data-top=\"{}\" data-bottom=\"{}\" data-share-max=\"{}\">\n",
                     xml_escape(spec.source), xml_escape(spec.body), stacked ? "stacked" : "line", coord(ax.left),
                     coord(ax.right), coord(ax.top), coord(ax.bottom), share(ax.share_max));

    // Grid and y axis.
    for (int k = 0; k <= 5; ++k) {
        double v = ax.share_max * k / 5.0;
        double y = ax.y(v);
        s += fmt::format("<line class=\"grid\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\n", coord(ax.left), coord(y),
                         coord(ax.right), coord(y));
        s += fmt::format("<text class=\"y-label\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.0f}%</text>\n",
                         coord(ax.left - 6), coord(y + 4), v * 100.0);
    }
    s += fmt::format("<line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\"/>\n", coord(ax.left),
                     coord(ax.top), coord(ax.bottom));
    s += fmt::format("<line class=\"axis\" x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\"/>\n", coord(ax.left),
                     coord(ax.right), coord(ax.bottom));

    // Time axis with the number of active politicians underneath.
    for (std::size_t i = 0; i < spec.time_points.size(); ++i) {
        double x = ax.x(i);
        s += fmt::format("<text class=\"x-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", coord(x),
                         coord(ax.bottom + 16), static_cast<int>(spec.time_points[i].year()));
        bool low = spec.active_counts[i] < audit::kLowSampleThreshold;
        s += fmt::format("<text class=\"active-count{}\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                         low ? " low-sample" : "", coord(x), coord(ax.bottom + 32), spec.active_counts[i]);
    }
    if (!spec.time_points.empty())
        s += fmt::format("<text class=\"x-note\" x=\"{}\" y=\"{}\">active politicians</text>\n", coord(ax.left),
                         coord(ax.bottom + 50));

    if (empty) {
        s += fmt::format("<text class=\"no-data\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">no data</text>\n",
                         coord((ax.left + ax.right) / 2), coord((ax.top + ax.bottom) / 2));
        s += "</g>\n</svg>\n";
        return s;
    }

    const std::size_t n = spec.time_points.size();
    std::vector<double> floor(n, 0.0), base_floor(n, 0.0);
    for (const auto& p : spec.parties) {
        std::vector<double> lo(n), hi(n), base(n);
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = stacked ? floor[i] + p.lower[i] : p.lower[i];
            hi[i] = stacked ? floor[i] + p.upper[i] : p.upper[i];
            base[i] = stacked ? base_floor[i] + p.baseline[i] : p.baseline[i];
        }
        std::vector<std::pair<double, double>> lower_pts, upper_pts, base_pts, band;
        for (std::size_t i = 0; i < n; ++i) {
            lower_pts.emplace_back(ax.x(i), ax.y(std::min(lo[i], ax.share_max)));
            upper_pts.emplace_back(ax.x(i), ax.y(std::min(hi[i], ax.share_max)));
            base_pts.emplace_back(ax.x(i), ax.y(std::min(base[i], ax.share_max)));
        }
        // Line style: band between the bounds. Stacked: the party's own slice.
        if (stacked) {
            for (std::size_t i = 0; i < n; ++i)
                band.emplace_back(ax.x(i), ax.y(std::min(lo[i], ax.share_max)));
            for (std::size_t i = n; i-- > 0;)
                band.emplace_back(ax.x(i), ax.y(std::min(floor[i], ax.share_max)));
        } else {
            band = upper_pts;
            band.insert(band.end(), lower_pts.rbegin(), lower_pts.rend());
        }

        const auto c = colour(p.alignment);
        const auto party = xml_escape(p.acronym);
        s += fmt::format("<g class=\"party\" data-party=\"{}\" data-alignment=\"{}\">\n", party, to_string(p.alignment));
        s += fmt::format("<polygon class=\"band\" data-party=\"{}\" fill=\"{}\" points=\"{}\"/>\n", party, c, points(band));
        s += fmt::format("<polyline class=\"bound-lower\" data-party=\"{}\" stroke=\"{}\" points=\"{}\"/>\n", party, c,
                         points(lower_pts));
        s += fmt::format("<polyline class=\"bound-upper{}\" data-party=\"{}\" stroke=\"{}\" points=\"{}\"/>\n",
                         stacked ? " stacked" : "", party, c, points(upper_pts));
        s += fmt::format("<polyline class=\"baseline\" data-party=\"{}\" stroke=\"{}\" points=\"{}\"/>\n", party, c,
                         points(base_pts));
        s += "</g>\n";

        if (stacked)
            for (std::size_t i = 0; i < n; ++i) {
                floor[i] = lo[i];
                base_floor[i] = base[i];
            }
    }

    // Legend in figure order.
    double ly = ax.top;
    for (const auto& p : spec.parties) {
        s += fmt::format("<rect class=\"legend-swatch\" x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
                         coord(ax.right + 20), coord(ly), colour(p.alignment));
        s += fmt::format("<text class=\"legend\" x=\"{}\" y=\"{}\">{} ({})</text>\n", coord(ax.right + 38),
                         coord(ly + 10), xml_escape(p.acronym), to_string(p.alignment));
        ly += 18;
    }
    s += "</g>\n</svg>\n";
    return s;
}

} // namespace kgdiv::report
