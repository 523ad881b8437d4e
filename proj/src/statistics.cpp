#include "rhem/statistics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rhem/errors.hpp"
#include "rhem/util.hpp"

namespace rhem {

namespace {

double aggregate_values(std::span<const double> values, Aggregator agg) {
  if (values.empty()) return 0.0;
  switch (agg) {
    case Aggregator::sum: {
      double s = 0;
      for (double v : values) s += v;
      return s;
    }
    case Aggregator::mean: {
      double s = 0;
      for (double v : values) s += v;
      return s / static_cast<double>(values.size());
    }
    case Aggregator::min:
      return *std::min_element(values.begin(), values.end());
    case Aggregator::max:
      return *std::max_element(values.begin(), values.end());
    case Aggregator::sd: {
      // Population standard deviation; a single value gives 0.
      double s = 0;
      for (double v : values) s += v;
      const double mean = s / static_cast<double>(values.size());
      double ss = 0;
      for (double v : values) ss += (v - mean) * (v - mean);
      return std::sqrt(ss / static_cast<double>(values.size()));
    }
  }
  return 0.0;
}

// Gathers node values selected by sorted index combinations into out.
void pick(std::span<const NodeId> nodes, std::span<const std::size_t> idx,
          std::vector<NodeId>& out) {
  out.clear();
  for (std::size_t i : idx) out.push_back(nodes[i]);
}

}  // namespace

std::string_view aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::mean: return "mean";
    case Aggregator::min: return "min";
    case Aggregator::max: return "max";
    case Aggregator::sum: return "sum";
    case Aggregator::sd: return "sd";
  }
  return "mean";
}

bool StatisticSpec::directed_only() const {
  switch (kind) {
    case StatKind::num_sources:
    case StatKind::num_targets:
    case StatKind::sub_repetition_directed:
    case StatKind::reciprocation:
    case StatKind::sub_reciprocation:
    case StatKind::switch_reciprocation:
    case StatKind::transitive_closure:
    case StatKind::cyclic_closure:
    case StatKind::shared_receivers:
    case StatKind::shared_senders:
      return true;
    default:
      return false;
  }
}

bool StatisticSpec::undirected_only() const {
  switch (kind) {
    case StatKind::size:
    case StatKind::size_squared:
    case StatKind::sub_repetition:
    case StatKind::shared_prior_events:
    case StatKind::closure:
    case StatKind::prior_sub_hyperedge_success:
      return true;
    default:
      return false;
  }
}

bool StatisticSpec::needs_outcomes() const {
  return kind == StatKind::prior_hyperedge_success ||
         kind == StatKind::prior_sub_hyperedge_success;
}

bool StatisticSpec::supports_aggregator() const {
  switch (kind) {
    case StatKind::sub_repetition:
    case StatKind::sub_repetition_directed:
    case StatKind::sub_reciprocation:
    case StatKind::covariate_aggregate:
      return true;
    default:
      return false;
  }
}

std::string StatisticSpec::label() const {
  std::string base;
  switch (kind) {
    case StatKind::size: base = "size"; break;
    case StatKind::size_squared: base = "size_squared"; break;
    case StatKind::num_sources: base = "num_sources"; break;
    case StatKind::num_targets: base = "num_targets"; break;
    case StatKind::repetition: base = "repetition"; break;
    case StatKind::sub_repetition:
      base = "subrep(" + std::to_string(p) + ")";
      break;
    case StatKind::sub_repetition_directed:
      base = "subrep(" + std::to_string(p) + "," + std::to_string(q) + ")";
      break;
    case StatKind::shared_prior_events:
      base = "shared_prior(" + std::to_string(p) + ")";
      break;
    case StatKind::reciprocation: base = "recip"; break;
    case StatKind::sub_reciprocation:
      base = "subrecip(" + std::to_string(p) + "," + std::to_string(q) + ")";
      break;
    case StatKind::switch_reciprocation:
      base = "switchrecip(" + std::to_string(l) + ")";
      break;
    case StatKind::closure:
      base = "closure(" + std::to_string(p) + "," + std::to_string(q) + "," +
             std::to_string(l) + ")";
      break;
    case StatKind::transitive_closure:
      base = "trans_closure(" + std::to_string(p) + "," + std::to_string(q) + "," +
             std::to_string(l) + ")";
      break;
    case StatKind::cyclic_closure:
      base = "cyclic_closure(" + std::to_string(p) + "," + std::to_string(q) + "," +
             std::to_string(l) + ")";
      break;
    case StatKind::shared_receivers:
      base = "shared_receivers(" + std::to_string(p) + "," + std::to_string(q) + "," +
             std::to_string(l) + ")";
      break;
    case StatKind::shared_senders:
      base = "shared_senders(" + std::to_string(p) + "," + std::to_string(q) + "," +
             std::to_string(l) + ")";
      break;
    case StatKind::covariate_aggregate: base = "covagg(" + attribute + ")"; break;
    case StatKind::prior_hyperedge_success: base = "prior_success"; break;
    case StatKind::prior_sub_hyperedge_success:
      base = "prior_sub_success(" + std::to_string(p) + ")";
      break;
  }
  if (supports_aggregator() && aggregator != Aggregator::mean) {
    base += ":";
    base += aggregator_name(aggregator);
  }
  return base;
}

StatisticSpec StatisticSpec::parse(std::string_view text) {
  auto fail = [&text](const std::string& why) -> StatisticSpec {
    throw ConfigError("bad statistic spec '" + std::string(text) + "': " + why);
  };

  std::string_view rest = text;
  const std::size_t name_end = rest.find_first_of("(:");
  std::string name(rest.substr(0, name_end));
  std::vector<std::string> args;
  std::string agg_text;
  if (name_end != std::string_view::npos && rest[name_end] == '(') {
    const std::size_t close = rest.find(')', name_end);
    if (close == std::string_view::npos) return fail("missing ')'");
    std::string arg_text(rest.substr(name_end + 1, close - name_end - 1));
    std::stringstream ss(arg_text);
    std::string item;
    while (std::getline(ss, item, ',')) args.push_back(item);
    if (!arg_text.empty() && arg_text.back() == ',') return fail("trailing comma");
    rest = rest.substr(close + 1);
    if (!rest.empty()) {
      if (rest[0] != ':') return fail("unexpected text after ')'");
      agg_text = std::string(rest.substr(1));
    }
  } else if (name_end != std::string_view::npos) {
    agg_text = std::string(rest.substr(name_end + 1));
  }

  auto int_arg = [&fail, &args](std::size_t i) -> int {
    const std::string& a = args[i];
    int value = 0;
    auto [ptr, ec] = std::from_chars(a.data(), a.data() + a.size(), value);
    if (ec != std::errc() || ptr != a.data() + a.size() || value < 0) {
      fail("order arguments must be non-negative integers");
    }
    return value;
  };
  auto expect_args = [&fail, &args](std::size_t n) {
    if (args.size() != n) fail("wrong number of arguments");
  };

  StatisticSpec spec;
  if (name == "size") {
    expect_args(0);
    spec.kind = StatKind::size;
  } else if (name == "size_squared") {
    expect_args(0);
    spec.kind = StatKind::size_squared;
  } else if (name == "num_sources") {
    expect_args(0);
    spec.kind = StatKind::num_sources;
  } else if (name == "num_targets") {
    expect_args(0);
    spec.kind = StatKind::num_targets;
  } else if (name == "repetition") {
    expect_args(0);
    spec.kind = StatKind::repetition;
  } else if (name == "subrep") {
    if (args.size() == 1) {
      spec.kind = StatKind::sub_repetition;
      spec.p = int_arg(0);
    } else if (args.size() == 2) {
      spec.kind = StatKind::sub_repetition_directed;
      spec.p = int_arg(0);
      spec.q = int_arg(1);
      if (spec.p == 0 && spec.q == 0) fail("directed sub-repetition requires p+q >= 1");
    } else {
      fail("subrep takes one (undirected) or two (directed) orders");
    }
  } else if (name == "shared_prior") {
    expect_args(1);
    spec.kind = StatKind::shared_prior_events;
    spec.p = int_arg(0);
  } else if (name == "recip") {
    expect_args(0);
    spec.kind = StatKind::reciprocation;
  } else if (name == "subrecip") {
    expect_args(2);
    spec.kind = StatKind::sub_reciprocation;
    spec.p = int_arg(0);
    spec.q = int_arg(1);
    if (spec.p == 0 && spec.q == 0) fail("sub-reciprocation requires p+q >= 1");
  } else if (name == "switchrecip") {
    expect_args(1);
    spec.kind = StatKind::switch_reciprocation;
    spec.l = int_arg(0);
    if (spec.l < 1) fail("switch order must be >= 1");
  } else if (name == "closure" || name == "trans_closure" || name == "cyclic_closure" ||
             name == "shared_receivers" || name == "shared_senders") {
    expect_args(3);
    spec.kind = name == "closure"            ? StatKind::closure
                : name == "trans_closure"    ? StatKind::transitive_closure
                : name == "cyclic_closure"   ? StatKind::cyclic_closure
                : name == "shared_receivers" ? StatKind::shared_receivers
                                             : StatKind::shared_senders;
    spec.p = int_arg(0);
    spec.q = int_arg(1);
    spec.l = int_arg(2);
    if (spec.p < 1 || spec.q < 1 || spec.l < 1) fail("closure orders must be >= 1");
  } else if (name == "covagg") {
    expect_args(1);
    spec.kind = StatKind::covariate_aggregate;
    spec.attribute = args[0];
    if (spec.attribute.empty()) fail("covagg needs an attribute name");
  } else if (name == "prior_success") {
    expect_args(0);
    spec.kind = StatKind::prior_hyperedge_success;
  } else if (name == "prior_sub_success") {
    expect_args(1);
    spec.kind = StatKind::prior_sub_hyperedge_success;
    spec.p = int_arg(0);
  } else {
    fail("unknown statistic name '" + name + "'");
  }

  if (!agg_text.empty()) {
    if (!spec.supports_aggregator()) fail("statistic does not take an aggregator");
    if (agg_text == "mean") {
      spec.aggregator = Aggregator::mean;
    } else if (agg_text == "min") {
      spec.aggregator = Aggregator::min;
    } else if (agg_text == "max") {
      spec.aggregator = Aggregator::max;
    } else if (agg_text == "sum") {
      spec.aggregator = Aggregator::sum;
    } else if (agg_text == "sd") {
      spec.aggregator = Aggregator::sd;
    } else {
      fail("unknown aggregator '" + agg_text + "'");
    }
  }
  return spec;
}

CovariateTable CovariateTable::from_columns(std::vector<std::string> names,
                                            std::vector<std::vector<double>> columns) {
  CovariateTable table;
  table.names_ = std::move(names);
  table.columns_ = std::move(columns);
  return table;
}

CovariateTable CovariateTable::load(const std::string& path, const NodeTable& nodes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open covariate file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("covariate file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  if (header.size() < 2 || header[0] != "label") {
    throw ConfigError("covariate file must start with header 'label,<attr>,...': " + path);
  }

  CovariateTable table;
  table.names_.assign(header.begin() + 1, header.end());
  table.columns_.assign(table.names_.size(), std::vector<double>(nodes.size(), 0.0));
  std::vector<bool> seen(nodes.size(), false);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (fields.size() != header.size()) {
      throw ConfigError("covariate file line " + std::to_string(line_no) +
                        ": expected " + std::to_string(header.size()) + " fields");
    }
    const auto id = nodes.find(fields[0]);
    if (!id.has_value()) continue;  // roster may exceed the ingested nodes
    for (std::size_t a = 0; a < table.names_.size(); ++a) {
      const std::string& v = fields[a + 1];
      double value = 0;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
      if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("covariate file line " + std::to_string(line_no) +
                          ": missing or malformed value for '" + table.names_[a] + "'");
      }
      table.columns_[a][*id] = value;
    }
    seen[*id] = true;
  }
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    if (!seen[v]) {
      throw ConfigError("covariate file does not cover node '" + nodes.label(
                            static_cast<NodeId>(v)) + "'");
    }
  }
  return table;
}

std::optional<std::size_t> CovariateTable::attribute_index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

StatisticEvaluator::StatisticEvaluator(const History& history,
                                       std::vector<StatisticSpec> specs,
                                       const CovariateTable* covariates, Options options)
    : history_(history),
      specs_(std::move(specs)),
      covariates_(covariates),
      options_(options) {
  attribute_indices_.assign(specs_.size(), 0);
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    validate_spec(specs_[i]);
    if (specs_[i].kind == StatKind::covariate_aggregate) {
      const auto idx = covariates_->attribute_index(specs_[i].attribute);
      if (!idx.has_value()) {
        throw ConfigError("unknown covariate attribute '" + specs_[i].attribute + "'");
      }
      attribute_indices_[i] = *idx;
    }
  }
}

void StatisticEvaluator::validate_spec(const StatisticSpec& spec) const {
  if (spec.directed_only() && !history_.directed()) {
    throw ConfigError("statistic/variant mismatch: " + spec.label() +
                      " requires directed hyperevents");
  }
  if (spec.undirected_only() && history_.directed()) {
    throw ConfigError("statistic/variant mismatch: " + spec.label() +
                      " requires undirected hyperevents");
  }
  if (spec.needs_outcomes() && !history_.has_outcomes()) {
    throw ConfigError("outcomes not available: " + spec.label() +
                      " requires a dataset with relational outcomes");
  }
  if (spec.kind == StatKind::covariate_aggregate && covariates_ == nullptr) {
    throw ConfigError("statistic " + spec.label() + " requires a covariate table");
  }
}

double StatisticEvaluator::node_universe(double t) const {
  return options_.closure_active_pool ? static_cast<double>(history_.active_node_count(t))
                                      : static_cast<double>(history_.node_count());
}

void StatisticEvaluator::ensure_profile(const HyperedgeView& h, double t, Workspace& ws) const {
  if (ws.profile_valid) return;
  history_.intersection_profile(h, t, ws.profile, ws.scratch);
  ws.profile_valid = true;
}

double StatisticEvaluator::eval(std::size_t spec_index, const HyperedgeView& h,
                                double t) const {
  Workspace ws;
  return eval(spec_index, h, t, ws);
}

double StatisticEvaluator::eval(std::size_t spec_index, const HyperedgeView& h, double t,
                                Workspace& ws) const {
  ws.profile_valid = false;
  if (spec_index >= specs_.size()) throw std::out_of_range("spec index out of range");
  return eval_one(spec_index, h, t, ws);
}

void StatisticEvaluator::eval_row(const HyperedgeView& h, double t, std::span<double> out,
                                  Workspace& ws) const {
  ws.profile_valid = false;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    out[i] = eval_one(i, h, t, ws);
  }
}

std::vector<double> StatisticEvaluator::eval_batch(std::span<const Hyperedge> hs,
                                                   double t) const {
  std::vector<double> matrix(hs.size() * specs_.size());
  Workspace ws;
  for (std::size_t r = 0; r < hs.size(); ++r) {
    eval_row(hs[r].view(), t, {matrix.data() + r * specs_.size(), specs_.size()}, ws);
  }
  return matrix;
}

double StatisticEvaluator::eval_one(std::size_t spec_index, const HyperedgeView& h,
                                    double t, Workspace& ws) const {
  const StatisticSpec& spec = specs_[spec_index];
  switch (spec.kind) {
    case StatKind::size:
      return static_cast<double>(h.nodes.size());
    case StatKind::size_squared: {
      const double s = static_cast<double>(h.nodes.size());
      return s * s;
    }
    case StatKind::num_sources:
      return static_cast<double>(h.nodes.size());
    case StatKind::num_targets:
      return static_cast<double>(h.targets.size());
    case StatKind::repetition:
      return static_cast<double>(history_.activity(h, t));
    case StatKind::sub_repetition:
      return sub_repetition_undirected(spec, h, t, ws);
    case StatKind::sub_repetition_directed:
      return sub_repetition_directed(spec, h.nodes, h.targets, t, ws, true);
    case StatKind::shared_prior_events: {
      if (spec.p == 0) return static_cast<double>(history_.events_before(t));
      ensure_profile(h, t, ws);
      std::int64_t count = 0;
      for (const auto& e : ws.profile) {
        if (e.shared >= static_cast<std::uint32_t>(spec.p)) ++count;
      }
      return static_cast<double>(count);
    }
    case StatKind::reciprocation: {
      const auto rev = HyperedgeView::make_directed(h.targets, h.nodes);
      return static_cast<double>(history_.activity(rev, t));
    }
    case StatKind::sub_reciprocation:
      return sub_repetition_directed(spec, h.targets, h.nodes, t, ws, false);
    case StatKind::switch_reciprocation:
      return switch_reciprocation(spec, h, t, ws);
    case StatKind::closure:
      return closure_undirected(spec, h, t, ws);
    case StatKind::transitive_closure:
    case StatKind::cyclic_closure:
    case StatKind::shared_receivers:
    case StatKind::shared_senders:
      return closure_directed(spec, h, t, ws);
    case StatKind::covariate_aggregate:
      return covariate_aggregate(spec, attribute_indices_[spec_index], h);
    case StatKind::prior_hyperedge_success: {
      const std::int64_t act = history_.activity(h, t);
      if (act == 0) return 0.0;  // 0/0 resolves to 0
      return history_.hyperedge_performance(h, t) / static_cast<double>(act);
    }
    case StatKind::prior_sub_hyperedge_success: {
      double num = 0, denom = 0;
      if (spec.p == 0) {
        denom = static_cast<double>(history_.events_before(t));
        num = history_.outcome_sum_before(t);
      } else {
        ensure_profile(h, t, ws);
        for (const auto& e : ws.profile) {
          const double c = binom_double(e.shared, static_cast<std::uint64_t>(spec.p));
          if (c == 0) continue;
          denom += c;
          num += c * *history_.event(e.ordinal).outcome;
        }
      }
      if (denom == 0) return 0.0;  // 0/0 resolves to 0
      return num / denom;
    }
  }
  return 0.0;
}

double StatisticEvaluator::sub_repetition_undirected(const StatisticSpec& spec,
                                                     const HyperedgeView& h, double t,
                                                     Workspace& ws) const {
  const std::size_t n = h.nodes.size();
  const std::uint64_t p = static_cast<std::uint64_t>(spec.p);
  if (p == 0) {
    // The single size-0 sub-hyperedge has degree equal to the count of all
    // past events.
    const double v = static_cast<double>(history_.events_before(t));
    return spec.aggregator == Aggregator::sd ? 0.0 : v;
  }
  if (p > n) return 0.0;  // no p-subsets exist

  if (spec.aggregator == Aggregator::mean || spec.aggregator == Aggregator::sum) {
    double total = 0;
    if (p == 1) {
      for (NodeId v : h.nodes) {
        total += static_cast<double>(history_.prefix_before(history_.node_events(v), t));
      }
    } else {
      ensure_profile(h, t, ws);
      for (const auto& e : ws.profile) total += binom_double(e.shared, p);
    }
    if (spec.aggregator == Aggregator::sum) return total;
    return total / binom_double(n, p);
  }

  // min/max/sd require the individual sub-hyperedge degrees.
  ws.values.clear();
  if (p == 1) {
    for (NodeId v : h.nodes) {
      ws.values.push_back(
          static_cast<double>(history_.prefix_before(history_.node_events(v), t)));
    }
  } else {
    for_each_combination(n, p, [&](std::span<const std::size_t> idx) {
      pick(h.nodes, idx, ws.sub1);
      ws.values.push_back(static_cast<double>(
          history_.degree(HyperedgeView::undirected({ws.sub1.data(), ws.sub1.size()}), t)));
    });
  }
  return aggregate_values(ws.values, spec.aggregator);
}

double StatisticEvaluator::sub_repetition_directed(const StatisticSpec& spec,
                                                   std::span<const NodeId> sources,
                                                   std::span<const NodeId> targets, double t,
                                                   Workspace& ws, bool profile_usable) const {
  const std::size_t na = sources.size();
  const std::size_t nb = targets.size();
  const std::uint64_t p = static_cast<std::uint64_t>(spec.p);
  const std::uint64_t q = static_cast<std::uint64_t>(spec.q);
  if (p > na || q > nb) return 0.0;
  const double norm = binom_double(na, p) * binom_double(nb, q);

  if (spec.aggregator == Aggregator::mean || spec.aggregator == Aggregator::sum) {
    double total = 0;
    if (p == 1 && q == 0) {
      for (NodeId v : sources) {
        total += static_cast<double>(
            history_.prefix_before(history_.node_events_as_source(v), t));
      }
    } else if (p == 0 && q == 1) {
      for (NodeId v : targets) {
        total += static_cast<double>(
            history_.prefix_before(history_.node_events_as_target(v), t));
      }
    } else {
      const auto hv = HyperedgeView::make_directed(sources, targets);
      if (profile_usable) {
        ensure_profile(hv, t, ws);
        for (const auto& e : ws.profile) {
          total += binom_double(e.shared, p) * binom_double(e.shared_targets, q);
        }
      } else {
        history_.intersection_profile(hv, t, ws.profile_rev, ws.scratch);
        for (const auto& e : ws.profile_rev) {
          total += binom_double(e.shared, p) * binom_double(e.shared_targets, q);
        }
      }
    }
    if (spec.aggregator == Aggregator::sum) return total;
    return total / norm;
  }

  ws.values.clear();
  for_each_combination(na, p, [&](std::span<const std::size_t> ia) {
    pick(sources, ia, ws.sub1);
    for_each_combination(nb, q, [&](std::span<const std::size_t> ib) {
      pick(targets, ib, ws.sub2);
      const auto sub = HyperedgeView::make_directed({ws.sub1.data(), ws.sub1.size()},
                                                    {ws.sub2.data(), ws.sub2.size()});
      ws.values.push_back(static_cast<double>(history_.degree(sub, t)));
    });
  });
  return aggregate_values(ws.values, spec.aggregator);
}

double StatisticEvaluator::switch_reciprocation(const StatisticSpec& spec,
                                                const HyperedgeView& h, double t,
                                                Workspace& ws) const {
  const std::size_t na = h.nodes.size();
  const std::size_t nb = h.targets.size();
  const std::uint64_t l = static_cast<std::uint64_t>(spec.l);
  // Loop check: defined only for loopless hyperedges.
  {
    std::size_t i = 0, j = 0;
    while (i < na && j < nb) {
      if (h.nodes[i] < h.targets[j]) {
        ++i;
      } else if (h.targets[j] < h.nodes[i]) {
        ++j;
      } else {
        throw std::invalid_argument("loopless required: " + spec.label() +
                                    " is undefined for directed loops");
      }
    }
  }
  if (l > na || l > nb) return 0.0;
  const double norm = binom_double(na, l) * binom_double(nb, l);

  double total = 0;
  for_each_combination(na, l, [&](std::span<const std::size_t> ia) {
    // a' = sources minus swapped-out block, plus the swapped-in target block
    for_each_combination(nb, l, [&](std::span<const std::size_t> ib) {
      ws.sub1.clear();
      std::size_t next = 0;
      for (std::size_t i = 0; i < na; ++i) {
        if (next < ia.size() && ia[next] == i) {
          ++next;
          continue;
        }
        ws.sub1.push_back(h.nodes[i]);
      }
      for (std::size_t j : ib) ws.sub1.push_back(h.targets[j]);
      std::sort(ws.sub1.begin(), ws.sub1.end());

      ws.sub2.clear();
      next = 0;
      for (std::size_t j = 0; j < nb; ++j) {
        if (next < ib.size() && ib[next] == j) {
          ++next;
          continue;
        }
        ws.sub2.push_back(h.targets[j]);
      }
      for (std::size_t i : ia) ws.sub2.push_back(h.nodes[i]);
      std::sort(ws.sub2.begin(), ws.sub2.end());

      const auto switched = HyperedgeView::make_directed({ws.sub1.data(), ws.sub1.size()},
                                                         {ws.sub2.data(), ws.sub2.size()});
      total += static_cast<double>(history_.degree(switched, t));
    });
  });
  return total / norm;
}

namespace {

// Collects the distinct nodes appearing on one side of the given events.
void gather_event_nodes(const History& history, std::span<const std::uint32_t> ordinals,
                        bool directed, bool target_side, std::vector<NodeId>& out) {
  out.clear();
  for (std::uint32_t o : ordinals) {
    const Hyperedge& edge = history.event(o).edge;
    const auto& nodes =
        directed ? (target_side ? edge.targets() : edge.sources()) : edge.members();
    out.insert(out.end(), nodes.begin(), nodes.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

void remove_nodes(std::vector<NodeId>& from, std::span<const NodeId> drop) {
  from.erase(std::remove_if(from.begin(), from.end(),
                            [&drop](NodeId v) {
                              return std::binary_search(drop.begin(), drop.end(), v);
                            }),
             from.end());
}

}  // namespace

double StatisticEvaluator::closure_undirected(const StatisticSpec& spec,
                                              const HyperedgeView& h, double t,
                                              Workspace& ws) const {
  const std::size_t n = h.nodes.size();
  const std::uint64_t p = static_cast<std::uint64_t>(spec.p);
  const std::uint64_t q = static_cast<std::uint64_t>(spec.q);
  const std::uint64_t l = static_cast<std::uint64_t>(spec.l);
  const double universe = node_universe(t);
  const double pool = universe - static_cast<double>(p + q);
  if (p > n || q > n - p || pool < static_cast<double>(l)) return 0.0;
  const double norm = binom_double(n, p) * binom_double(n - p, q) *
                      binom_double(static_cast<std::uint64_t>(pool), l);
  if (norm <= 0) return 0.0;

  double total = 0;
  std::vector<NodeId> rest;
  for_each_combination(n, p, [&](std::span<const std::size_t> ia) {
    pick(h.nodes, ia, ws.sub1);
    rest.clear();
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (next < ia.size() && ia[next] == i) {
        ++next;
        continue;
      }
      rest.push_back(h.nodes[i]);
    }
    history_.containing_events(HyperedgeView::undirected({ws.sub1.data(), ws.sub1.size()}), t,
                               ws.ord1);
    if (ws.ord1.empty()) return;
    gather_event_nodes(history_, ws.ord1, false, false, ws.nodes1);

    for_each_combination(rest.size(), q, [&](std::span<const std::size_t> ib) {
      pick(rest, ib, ws.sub2);
      history_.containing_events(
          HyperedgeView::undirected({ws.sub2.data(), ws.sub2.size()}), t, ws.ord2);
      if (ws.ord2.empty()) return;
      gather_event_nodes(history_, ws.ord2, false, false, ws.nodes2);

      // Candidate third-party nodes must co-occur with both blocks; excluded
      // nodes contribute zero terms, so pruning is value preserving.
      ws.candidates.clear();
      std::set_intersection(ws.nodes1.begin(), ws.nodes1.end(), ws.nodes2.begin(),
                            ws.nodes2.end(), std::back_inserter(ws.candidates));
      remove_nodes(ws.candidates, {ws.sub1.data(), ws.sub1.size()});
      remove_nodes(ws.candidates, {ws.sub2.data(), ws.sub2.size()});
      if (ws.candidates.size() < l) return;

      if (l == 1) {
        for (NodeId v : ws.candidates) {
          const auto vlist = history_.node_events(v);
          const std::size_t d1 = sorted_intersection_count(
              {ws.ord1.data(), ws.ord1.size()}, vlist);
          if (d1 == 0) continue;
          const std::size_t d2 = sorted_intersection_count(
              {ws.ord2.data(), ws.ord2.size()}, vlist);
          total += static_cast<double>(std::min(d1, d2));
        }
        return;
      }
      for_each_combination(ws.candidates.size(), l, [&](std::span<const std::size_t> iv) {
        std::size_t d1 = ws.ord1.size(), d2 = ws.ord2.size();
        ws.ord_tmp.assign(ws.ord1.begin(), ws.ord1.end());
        for (std::size_t ci : iv) {
          std::vector<std::uint32_t> merged;
          sorted_intersect({ws.ord_tmp.data(), ws.ord_tmp.size()},
                           history_.node_events(ws.candidates[ci]), merged);
          ws.ord_tmp = std::move(merged);
          if (ws.ord_tmp.empty()) break;
        }
        d1 = ws.ord_tmp.size();
        if (d1 == 0) return;
        ws.ord_tmp.assign(ws.ord2.begin(), ws.ord2.end());
        for (std::size_t ci : iv) {
          std::vector<std::uint32_t> merged;
          sorted_intersect({ws.ord_tmp.data(), ws.ord_tmp.size()},
                           history_.node_events(ws.candidates[ci]), merged);
          ws.ord_tmp = std::move(merged);
          if (ws.ord_tmp.empty()) break;
        }
        d2 = ws.ord_tmp.size();
        total += static_cast<double>(std::min(d1, d2));
      });
    });
  });
  return total / norm;
}

double StatisticEvaluator::closure_directed(const StatisticSpec& spec, const HyperedgeView& h,
                                            double t, Workspace& ws) const {
  // Role layout per variant: does the fixed block of each min() argument sit
  // on the source side, and on which side do the V' nodes live?
  bool first_base_source = true, first_v_targets = true;
  bool second_base_source = true, second_v_targets = true;
  switch (spec.kind) {
    case StatKind::transitive_closure:
      first_base_source = true;  first_v_targets = true;   // deg((a', V'))
      second_base_source = false; second_v_targets = false;  // deg((V', b'))
      break;
    case StatKind::cyclic_closure:
      first_base_source = false; first_v_targets = false;  // deg((V', a'))
      second_base_source = true; second_v_targets = true;  // deg((b', V'))
      break;
    case StatKind::shared_receivers:
      first_base_source = true;  first_v_targets = true;   // deg((a', V'))
      second_base_source = true; second_v_targets = true;  // deg((b', V'))
      break;
    case StatKind::shared_senders:
      first_base_source = false; first_v_targets = false;  // deg((V', a'))
      second_base_source = false; second_v_targets = false;  // deg((V', b'))
      break;
    default:
      throw std::logic_error("closure_directed called with a non-closure kind");
  }

  {
    // Loopless check.
    std::size_t i = 0, j = 0;
    while (i < h.nodes.size() && j < h.targets.size()) {
      if (h.nodes[i] < h.targets[j]) {
        ++i;
      } else if (h.targets[j] < h.nodes[i]) {
        ++j;
      } else {
        throw std::invalid_argument("loopless required: " + spec.label() +
                                    " is undefined for directed loops");
      }
    }
  }

  const std::size_t na = h.nodes.size();
  const std::size_t nb = h.targets.size();
  const std::uint64_t p = static_cast<std::uint64_t>(spec.p);
  const std::uint64_t q = static_cast<std::uint64_t>(spec.q);
  const std::uint64_t l = static_cast<std::uint64_t>(spec.l);
  const double universe = node_universe(t);
  const double pool = universe - static_cast<double>(p + q);
  if (p > na || q > nb || pool < static_cast<double>(l)) return 0.0;
  const double norm = binom_double(na, p) * binom_double(nb, q) *
                      binom_double(static_cast<std::uint64_t>(pool), l);
  if (norm <= 0) return 0.0;

  // Events whose chosen side contains the fixed block.
  auto containing_on_side = [&](std::span<const NodeId> block, bool side_source,
                                std::vector<std::uint32_t>& out) {
    const auto view = side_source
                          ? HyperedgeView::make_directed(block, {})
                          : HyperedgeView::make_directed({}, block);
    history_.containing_events(view, t, out);
  };
  auto v_list = [&](NodeId v, bool v_targets) {
    return v_targets ? history_.node_events_as_target(v) : history_.node_events_as_source(v);
  };

  double total = 0;
  for_each_combination(na, p, [&](std::span<const std::size_t> ia) {
    pick(h.nodes, ia, ws.sub1);
    containing_on_side({ws.sub1.data(), ws.sub1.size()}, first_base_source, ws.ord1);
    if (ws.ord1.empty()) return;
    gather_event_nodes(history_, ws.ord1, true, first_v_targets, ws.nodes1);

    for_each_combination(nb, q, [&](std::span<const std::size_t> ib) {
      pick(h.targets, ib, ws.sub2);
      containing_on_side({ws.sub2.data(), ws.sub2.size()}, second_base_source, ws.ord2);
      if (ws.ord2.empty()) return;
      gather_event_nodes(history_, ws.ord2, true, second_v_targets, ws.nodes2);

      ws.candidates.clear();
      std::set_intersection(ws.nodes1.begin(), ws.nodes1.end(), ws.nodes2.begin(),
                            ws.nodes2.end(), std::back_inserter(ws.candidates));
      remove_nodes(ws.candidates, {ws.sub1.data(), ws.sub1.size()});
      remove_nodes(ws.candidates, {ws.sub2.data(), ws.sub2.size()});
      if (ws.candidates.size() < l) return;

      if (l == 1) {
        for (NodeId v : ws.candidates) {
          const std::size_t d1 = sorted_intersection_count(
              {ws.ord1.data(), ws.ord1.size()}, v_list(v, first_v_targets));
          if (d1 == 0) continue;
          const std::size_t d2 = sorted_intersection_count(
              {ws.ord2.data(), ws.ord2.size()}, v_list(v, second_v_targets));
          total += static_cast<double>(std::min(d1, d2));
        }
        return;
      }
      for_each_combination(ws.candidates.size(), l, [&](std::span<const std::size_t> iv) {
        auto intersect_all = [&](const std::vector<std::uint32_t>& base,
                                 bool v_targets) -> std::size_t {
          ws.ord_tmp.assign(base.begin(), base.end());
          for (std::size_t ci : iv) {
            std::vector<std::uint32_t> merged;
            sorted_intersect({ws.ord_tmp.data(), ws.ord_tmp.size()},
                             v_list(ws.candidates[ci], v_targets), merged);
            ws.ord_tmp = std::move(merged);
            if (ws.ord_tmp.empty()) return 0;
          }
          return ws.ord_tmp.size();
        };
        const std::size_t d1 = intersect_all(ws.ord1, first_v_targets);
        if (d1 == 0) return;
        const std::size_t d2 = intersect_all(ws.ord2, second_v_targets);
        total += static_cast<double>(std::min(d1, d2));
      });
    });
  });
  return total / norm;
}

double StatisticEvaluator::covariate_aggregate(const StatisticSpec& spec, std::size_t attr,
                                               const HyperedgeView& h) const {
  std::vector<double> values;
  if (!h.directed) {
    values.reserve(h.nodes.size());
    for (NodeId v : h.nodes) values.push_back(covariates_->value(attr, v));
  } else {
    // Participants of a directed hyperevent: sources and targets, each node
    // counted once.
    std::vector<NodeId> all;
    all.reserve(h.nodes.size() + h.targets.size());
    std::set_union(h.nodes.begin(), h.nodes.end(), h.targets.begin(), h.targets.end(),
                   std::back_inserter(all));
    values.reserve(all.size());
    for (NodeId v : all) values.push_back(covariates_->value(attr, v));
  }
  return aggregate_values(values, spec.aggregator);
}

}  // namespace rhem
