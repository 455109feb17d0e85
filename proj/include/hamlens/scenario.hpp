// Batch scenario runner: JSON configs in, CSV/JSON artifacts out.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hamlens/boundary.hpp"
#include "hamlens/hamiltonian.hpp"

namespace hamlens {

using Json = nlohmann::ordered_json;

struct RunOptions {
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::vector<std::string> overrides; // dotted.path=value
};

struct RunResult {
    int exit_code = 0; // 0 all checks pass, 2 some check over threshold
    Json summary;
};

RunResult run_scenario(const std::string& config_path, const RunOptions& opts = {});

// Schema findings without executing; empty report means the file validates.
std::vector<std::string> validate_scenario(const std::string& config_path);

Json builtin_catalog();

// Config-fragment builders, shared with the tests.
HamiltonianModel build_model(const Json& spec);
Domain build_domain(const Json& spec);

} // namespace hamlens
