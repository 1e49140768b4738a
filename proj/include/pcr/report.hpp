#pragma once

// JSON serialization of results and experiment configs.

#include <string>

#include "json.hpp"
#include "pcr/core.hpp"
#include "pcr/crt.hpp"
#include "pcr/parameter_free.hpp"
#include "pcr/power_oracle.hpp"
#include "pcr/robust.hpp"
#include "pcr/simlab.hpp"

namespace pcr {

using Json = nlohmann::ordered_json;

Json to_json(const PcrResult& r);
Json to_json(const CrtResult& r);
Json to_json(const PfResult& r);
Json to_json(const RobustPcrResult& r);
Json to_json(const PowerReport& r);
Json to_json(const ModelSpec& m);
Json to_json(const ExperimentSpec& s);
// Summary plus coefficients; per-replicate rows only if `with_replicates`.
Json to_json(const ExperimentReport& r, bool with_replicates = false);

// Accepted keys mirror to_json(ExperimentSpec); anything missing keeps its default.
// Unknown keys throw std::invalid_argument.
ModelSpec model_spec_from_json(const Json& j);
ExperimentSpec experiment_spec_from_json(const Json& j);

// A config file holds one experiment object or {"experiments": [...]}.
std::vector<ExperimentSpec> read_experiment_config(const std::string& path);

// Stable text form: two-space indent and a trailing newline.
std::string dump_json(const Json& j);

}  // namespace pcr
