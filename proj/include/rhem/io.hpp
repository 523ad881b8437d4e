#pragma once

#include <cstdint>
#include <string>

#include "rhem/types.hpp"

namespace rhem {

// Event log files are comma separated with a header row and one event per
// line, non-decreasing in time:
//   undirected: time,members,weight,outcome
//   directed:   time,sources,targets,weight,outcome
// Member lists are semicolon-separated UTF-8 labels; empty fields mean the
// value is absent. Events larger than max_event_size keep their first listed
// participants and are counted in Dataset::truncated_events.
Dataset load_event_log(const std::string& path, bool directed,
                       std::uint32_t max_event_size = 100);

void write_event_log(const Dataset& data, const std::string& path);

}  // namespace rhem
