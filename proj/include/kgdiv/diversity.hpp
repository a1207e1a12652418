#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgdiv/errors.hpp"

// Stirling actor diversity:
//
//   delta = sum over ordered pairs (i, j), i != j, of d(i,j)^alpha * (p_i * p_j)^beta
//
// Variety is the number of entities, balance is carried by the shares p_i and
// disparity by the pairwise dissimilarities d(i,j).
namespace kgdiv::diversity {

class DiversityError : public Error {
public:
    using Error::Error;
};

enum class ActorType { person, organisation, geopolitical_entity };

std::string_view to_string(ActorType t);
std::optional<ActorType> parse_actor_type(std::string_view s);

using Feature = std::pair<std::string, std::string>; // feature_name, feature_value
using FeatureSet = std::set<Feature>;

struct EntityRecord {
    std::string id;
    std::string label;
    ActorType actor_type = ActorType::person;
    FeatureSet features;
};

// entity id -> share; shares sum to 1 unless empty.
using BalanceVector = std::map<std::string, double>;

// Symmetric, zero diagonal, values in [0, 1]. Ids are kept sorted.
class DisparityMatrix {
public:
    DisparityMatrix() = default;
    explicit DisparityMatrix(std::vector<std::string> ids);

    // Sets d(a,b) and d(b,a). Throws on a == b, unknown ids or a value outside [0, 1].
    void set(std::string_view a, std::string_view b, double value);
    double at(std::string_view a, std::string_view b) const;

    const std::vector<std::string>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }
    // Direct access by position in ids().
    double at_index(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }

private:
    std::size_t index_of(std::string_view id) const;

    std::vector<std::string> ids_;
    std::vector<double> values_;
};

struct DiversityParams {
    double alpha = 1.0;
    double beta = 1.0;

    void validate() const; // both finite and >= 0
};

struct DiversityResult {
    double delta = 0.0;
    std::size_t variety = 0;
    BalanceVector balance;
    DiversityParams params;
    // Filled only when requested; keyed by ordered pair (i, j).
    std::optional<std::map<std::pair<std::string, std::string>, double>> per_pair_terms;
};

// Normalizes counts to shares. An empty map gives an empty vector; a nonempty
// map whose counts are all zero is rejected ("no occurrences").
BalanceVector compute_balance(const std::map<std::string, std::uint64_t>& counts);

// 1 - |A n B| / |A u B|; two empty sets are indistinguishable (0), one empty
// and one nonempty set are fully disjoint (1).
double jaccard_distance(const FeatureSet& a, const FeatureSet& b);

using DisparityFunction = std::function<double(const EntityRecord&, const EntityRecord&)>;

// Known metric ids: "jaccard". Throws DiversityError on an unknown id or a
// duplicated entity id.
DisparityMatrix compute_disparity(std::span<const EntityRecord> entities,
                                  std::string_view metric = "jaccard");
DisparityMatrix compute_disparity(std::span<const EntityRecord> entities,
                                  const DisparityFunction& metric);

// Sums over ordered pairs, so each unordered pair counts twice. Pairs with
// zero disparity contribute nothing for any alpha, and so do pairs where an
// entity has zero share. Throws when the two inputs cover different ids.
DiversityResult stirling_delta(const BalanceVector& balance, const DisparityMatrix& disparity,
                               const DiversityParams& params = {}, bool keep_terms = false);

// 1 - sum p_i^2.
double gini_simpson(const BalanceVector& balance);

} // namespace kgdiv::diversity
