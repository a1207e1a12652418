#include "kgdiv/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace kgdiv::diversity {

std::string_view to_string(ActorType t) {
    switch (t) {
    case ActorType::person:
        return "person";
    case ActorType::organisation:
        return "organisation";
    case ActorType::geopolitical_entity:
        return "geopolitical-entity";
    }
    return "person";
}

std::optional<ActorType> parse_actor_type(std::string_view s) {
    if (s == "person")
        return ActorType::person;
    if (s == "organisation" || s == "organization")
        return ActorType::organisation;
    if (s == "geopolitical-entity" || s == "gpe")
        return ActorType::geopolitical_entity;
    return std::nullopt;
}

DisparityMatrix::DisparityMatrix(std::vector<std::string> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end())
        throw DiversityError("disparity matrix: duplicate entity id");
    values_.assign(ids_.size() * ids_.size(), 0.0);
}

std::size_t DisparityMatrix::index_of(std::string_view id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id)
        throw DiversityError(fmt::format("disparity matrix: unknown entity '{}'", id));
    return static_cast<std::size_t>(it - ids_.begin());
}

void DisparityMatrix::set(std::string_view a, std::string_view b, double value) {
    if (!(value >= 0.0 && value <= 1.0))
        throw DiversityError(fmt::format("disparity {} for ({}, {}) is outside [0, 1]", value, a, b));
    auto i = index_of(a);
    auto j = index_of(b);
    if (i == j)
        throw DiversityError(fmt::format("disparity of '{}' with itself is fixed at 0", a));
    values_[i * ids_.size() + j] = value;
    values_[j * ids_.size() + i] = value;
}

double DisparityMatrix::at(std::string_view a, std::string_view b) const {
    return at_index(index_of(a), index_of(b));
}

void DiversityParams::validate() const {
    if (!(std::isfinite(alpha) && alpha >= 0.0) || !(std::isfinite(beta) && beta >= 0.0))
        throw DiversityError(fmt::format("alpha and beta must be finite and >= 0 (got {}, {})", alpha, beta));
}

BalanceVector compute_balance(const std::map<std::string, std::uint64_t>& counts) {
    BalanceVector shares;
    if (counts.empty())
        return shares;
    std::uint64_t total = 0;
    for (const auto& [id, n] : counts)
        total += n;
    if (total == 0)
        throw DiversityError("no occurrences");
    for (const auto& [id, n] : counts)
        shares.emplace(id, static_cast<double>(n) / static_cast<double>(total));
    return shares;
}

double jaccard_distance(const FeatureSet& a, const FeatureSet& b) {
    if (a.empty() && b.empty())
        return 0.0;
    std::size_t common = 0;
    // Both sets are ordered, so a merge walk counts the intersection.
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    std::size_t united = a.size() + b.size() - common;
    return 1.0 - static_cast<double>(common) / static_cast<double>(united);
}

DisparityMatrix compute_disparity(std::span<const EntityRecord> entities, const DisparityFunction& metric) {
    std::vector<std::string> ids;
    ids.reserve(entities.size());
    for (const auto& e : entities)
        ids.push_back(e.id);
    DisparityMatrix m(std::move(ids));
    for (std::size_t i = 0; i < entities.size(); ++i)
        for (std::size_t j = i + 1; j < entities.size(); ++j)
            m.set(entities[i].id, entities[j].id, metric(entities[i], entities[j]));
    return m;
}

DisparityMatrix compute_disparity(std::span<const EntityRecord> entities, std::string_view metric) {
    if (metric == "jaccard")
        return compute_disparity(entities, [](const EntityRecord& a, const EntityRecord& b) {
            return jaccard_distance(a.features, b.features);
        });
    throw DiversityError(fmt::format("unknown disparity metric '{}'", metric));
}

DiversityResult stirling_delta(const BalanceVector& balance, const DisparityMatrix& disparity,
                               const DiversityParams& params, bool keep_terms) {
    params.validate();
    const auto& ids = disparity.ids();
    bool same_ids = ids.size() == balance.size() &&
                    std::equal(ids.begin(), ids.end(), balance.begin(),
                               [](const std::string& id, const auto& kv) { return id == kv.first; });
    if (!same_ids)
        throw DiversityError("balance and disparity cover different entity sets");

    DiversityResult result;
    result.variety = ids.size();
    result.balance = balance;
    result.params = params;
    if (keep_terms)
        result.per_pair_terms.emplace();

    // BalanceVector is ordered like ids(), so shares line up by position.
    std::vector<double> p;
    p.reserve(balance.size());
    for (const auto& [id, share] : balance)
        p.push_back(share);

    double delta = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = 0; j < ids.size(); ++j) {
            if (i == j)
                continue;
            double d = disparity.at_index(i, j);
            double pp = p[i] * p[j];
            double term = (d == 0.0 || pp == 0.0) ? 0.0 : std::pow(d, params.alpha) * std::pow(pp, params.beta);
            delta += term;
            if (keep_terms)
                result.per_pair_terms->emplace(std::make_pair(ids[i], ids[j]), term);
        }
    }
    result.delta = delta;
    return result;
}

double gini_simpson(const BalanceVector& balance) {
    double sum_sq = 0.0;
    for (const auto& [id, share] : balance)
        sum_sq += share * share;
    return balance.empty() ? 0.0 : 1.0 - sum_sq;
}

} // namespace kgdiv::diversity
