#include "rhem/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "rhem/errors.hpp"

namespace rhem {

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string::size_type begin = 0;
  for (;;) {
    const auto pos = line.find(delim, begin);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(begin));
      return fields;
    }
    fields.push_back(line.substr(begin, pos - begin));
    begin = pos + 1;
  }
}

double parse_double(const std::string& field, const std::string& path, std::size_t line_no,
                    const char* what) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed " + what + " '" +
                      field + "'");
  }
  return value;
}

std::vector<NodeId> parse_members(const std::string& field, NodeTable& nodes,
                                  std::uint32_t max_size, bool& truncated,
                                  const std::string& path, std::size_t line_no,
                                  const char* what) {
  if (field.empty()) {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": empty " + what + " list");
  }
  const auto labels = split(field, ';');
  std::vector<NodeId> ids;
  ids.reserve(labels.size());
  for (const auto& label : labels) {
    if (label.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty label in " + what);
    }
    if (ids.size() >= max_size) {
      truncated = true;
      break;  // keep the first listed participants
    }
    ids.push_back(nodes.intern(label));
  }
  return ids;
}

std::string format_double(double v) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

}  // namespace

Dataset load_event_log(const std::string& path, bool directed, std::uint32_t max_event_size) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open event log: " + path);
  if (max_event_size == 0) throw ConfigError("max event size must be positive");

  const std::string expected_header =
      directed ? "time,sources,targets,weight,outcome" : "time,members,weight,outcome";
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("event log is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header) {
    throw ConfigError(path + ": expected header '" + expected_header + "', found '" + line +
                      "'");
  }
  const std::size_t n_fields = directed ? 5 : 4;

  Dataset data;
  data.directed = directed;
  std::size_t with_outcome = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != n_fields) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(n_fields) + " fields, found " +
                        std::to_string(fields.size()));
    }

    Event event;
    event.time = parse_double(fields[0], path, line_no, "time");
    if (!data.events.empty() && event.time < data.events.back().time) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": events must be non-decreasing in time");
    }

    bool truncated = false;
    if (directed) {
      auto sources =
          parse_members(fields[1], data.nodes, max_event_size, truncated, path, line_no,
                        "source");
      auto targets =
          parse_members(fields[2], data.nodes, max_event_size, truncated, path, line_no,
                        "target");
      event.edge = Hyperedge::directed(std::move(sources), std::move(targets));
    } else {
      auto members = parse_members(fields[1], data.nodes, max_event_size, truncated, path,
                                   line_no, "member");
      event.edge = Hyperedge::undirected(std::move(members));
    }
    if (truncated) ++data.truncated_events;

    const std::string& weight = fields[n_fields - 2];
    if (!weight.empty()) event.weight = parse_double(weight, path, line_no, "weight");
    const std::string& outcome = fields[n_fields - 1];
    if (!outcome.empty()) {
      event.outcome = parse_double(outcome, path, line_no, "outcome");
      ++with_outcome;
    }
    data.events.push_back(std::move(event));
  }

  if (with_outcome > 0 && with_outcome != data.events.size()) {
    throw ConfigError(path + ": outcomes must be present on every event or on none (" +
                      std::to_string(with_outcome) + " of " +
                      std::to_string(data.events.size()) + " rows carry one)");
  }
  data.has_outcomes = with_outcome > 0;
  return data;
}

void write_event_log(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write event log: " + path);
  out << (data.directed ? "time,sources,targets,weight,outcome"
                        : "time,members,weight,outcome")
      << "\n";
  auto write_nodes = [&out, &data](const std::vector<NodeId>& nodes) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (i > 0) out << ';';
      out << data.nodes.label(nodes[i]);
    }
  };
  for (const Event& e : data.events) {
    out << format_double(e.time) << ',';
    if (data.directed) {
      write_nodes(e.edge.sources());
      out << ',';
      write_nodes(e.edge.targets());
    } else {
      write_nodes(e.edge.members());
    }
    out << ',';
    if (e.weight.has_value()) out << format_double(*e.weight);
    out << ',';
    if (e.outcome.has_value()) out << format_double(*e.outcome);
    out << "\n";
  }
}

}  // namespace rhem
