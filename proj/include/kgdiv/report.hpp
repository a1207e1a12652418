#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgdiv/bias_audit.hpp"

namespace kgdiv::report {

// Alignment category order, then acronym.
std::vector<audit::PartyRecord> order_parties(std::vector<audit::PartyRecord> parties);

const std::vector<std::string>& series_columns();

// Rows sorted by source, party figure order, then time point. Shares are
// printed with six decimals.
std::string emit_series_csv(std::span<const audit::AuditRow> rows);

struct RowIssue {
    std::size_t line = 0;
    std::string message;
};

class SeriesParseError : public DataError {
public:
    SeriesParseError(std::string what, std::vector<RowIssue> issues);
    const std::vector<RowIssue>& issues() const { return issues_; }

private:
    std::vector<RowIssue> issues_;
};

// Accepts an empty document or a bare header as zero rows. Collects every
// bad row before throwing.
std::vector<audit::AuditRow> parse_series_csv(std::string_view text, std::string_view what = "audit csv");

enum class RenderStyle { line, stacked };

struct PartySeries {
    std::string acronym;
    audit::Alignment alignment = audit::Alignment::unknown;
    std::vector<double> lower; // one entry per time point
    std::vector<double> upper;
    std::vector<double> baseline;
};

struct FigureSpec {
    std::string title;
    std::string source;
    std::string body;
    std::vector<Date> time_points; // ascending
    std::vector<PartySeries> parties; // figure order
    std::vector<std::size_t> active_counts;
    RenderStyle style = RenderStyle::line;

    void validate() const; // throws DataError
};

// One figure per source found in the rows.
std::vector<FigureSpec> figures_from_rows(std::span<const audit::AuditRow> rows, std::string_view body,
                                          RenderStyle style);

// Maps time points and shares to SVG user coordinates.
struct AxisTransform {
    double left = 70;
    double right = 560;
    double top = 50;
    double bottom = 330;
    double share_max = 1.0;
    std::vector<Date> time_points;

    double x(std::size_t i) const;
    double y(double share) const;
    double share_at(double y_coord) const;
};

AxisTransform axis_for(const FigureSpec& spec);

// Line style: per party a band polygon between the lower and upper share
// with bold bound polylines and a thin baseline polyline. Stacked style
// stacks the lower shares; the band spans the party's own slice and the
// upper bound and baseline are drawn on top of the slices below it.
std::string emit_figure_svg(const FigureSpec& spec);

} // namespace kgdiv::report
