#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "rhem/estimate.hpp"
#include "rhem/sampling.hpp"

namespace rhem {

using ordered_json = nlohmann::ordered_json;

std::string significance_stars(double p);

ordered_json fit_to_json(const ModelFit& fit);
ordered_json replicated_to_json(const ReplicatedFit& result);
ordered_json rom_to_json(const RomFit& fit);

// Aligned multi-column table, one column per replication, plus the
// variability summary. Refuses to combine fits carrying different risk-set
// policy tags: their likelihoods are computed on different data and their
// AIC values are not comparable.
std::string replicated_table_text(const ReplicatedFit& result);
std::string rom_table_text(const RomFit& fit);

}  // namespace rhem
