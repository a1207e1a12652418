#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kgdiv/bias_audit.hpp"
#include "kgdiv/diversity.hpp"
#include "kgdiv/entities.hpp"
#include "kgdiv/kg_clients.hpp"

namespace kgdiv::cli {

enum ExitCode { kSuccess = 0, kFailure = 1, kUsage = 2 };

// One JSON file; relative paths resolve against the file's directory.
// Every key is optional.
struct RunConfig {
    std::map<kg::Dialect, kg::EndpointConfig> endpoints;
    std::filesystem::path templates;
    std::filesystem::path ontology;
    std::optional<std::filesystem::path> normalization_map;
    std::optional<std::filesystem::path> party_classes;
    std::optional<std::filesystem::path> baselines;
    std::optional<std::filesystem::path> career_end;
    std::optional<std::string> body;
    std::vector<Date> schedule;
    audit::BaselinePolicy baseline_policy = audit::BaselinePolicy::most_recent_preceding;
    double max_unmapped_fraction = 0.25;

    diversity::DiversityParams diversity;
    std::string metric = "jaccard";
    std::optional<std::filesystem::path> rules;
    std::optional<std::filesystem::path> triples; // N-Triples knowledge source for enrichment
    kg::Dialect knowledge_dialect = kg::Dialect::en_dbpedia;
    bool sparql_enrichment = false;               // look entities up at the endpoint instead
    std::optional<entities::AnnotatorConfig> annotator;

    std::filesystem::path output_dir = "out";

    // Built-in endpoints and the bundled template catalog and ontology.
    static RunConfig defaults();
    static RunConfig parse(std::string_view json_text, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& path); // throws ConfigError

    // KGDIV_ENDPOINT_<DIALECT> (upper case, '-' as '_') replaces endpoint urls.
    void apply_environment();
};

// Runs the kgdiv command line; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace kgdiv::cli
