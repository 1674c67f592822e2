#pragma once

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "noctsim/core.hpp"

namespace noctsim {

struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_, const std::string& what_)
      : std::runtime_error("line " + std::to_string(line_) + ": " + what_),
        line(line_) {}
};
struct BoundsError : std::runtime_error {
  int line;
  BoundsError(int line_, const std::string& what_)
      : std::runtime_error("line " + std::to_string(line_) + ": " + what_),
        line(line_) {}
};
struct EmptyTrace : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MeshTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TracePair {
  Coord src{};
  Coord dest{};
  double weight = 0.0;
};

/// Packet source description: uniform random destinations, or a weighted
/// (src, dest) pair list. rate is offered load in flits/cycle/node; for
/// traces it is the aggregate scale, split across sources by weight share.
struct TrafficPattern {
  enum class Kind { Uniform, Trace };
  Kind kind = Kind::Uniform;
  double rate = 0.0;
  std::vector<TracePair> pairs;  // Trace only

  static TrafficPattern uniform(double rate_) {
    TrafficPattern p;
    p.kind = Kind::Uniform;
    p.rate = rate_;
    return p;
  }
  static TrafficPattern trace(std::vector<TracePair> pairs_, double rate_) {
    TrafficPattern p;
    p.kind = Kind::Trace;
    p.rate = rate_;
    p.pairs = std::move(pairs_);
    return p;
  }
};

// ---------------------------------------------------------------------------
// Workload files: "noctrace v1", then "src_x src_y dest_x dest_y weight".

inline TrafficPattern parse_trace(std::istream& in, const SimConfig& cfg,
                                  double rate) {
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line) || line != "noctrace v1")
    throw ParseError(1, "expected header 'noctrace v1'");
  std::vector<TracePair> pairs;
  double weight_sum = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TracePair p;
    if (!(ls >> p.src.x >> p.src.y >> p.dest.x >> p.dest.y >> p.weight))
      throw ParseError(lineno, "expected 'src_x src_y dest_x dest_y weight'");
    std::string rest;
    if (ls >> rest) throw ParseError(lineno, "trailing fields");
    if (p.weight < 0.0) throw ParseError(lineno, "negative weight");
    if (!cfg.in_bounds(p.src) || !cfg.in_bounds(p.dest))
      throw BoundsError(lineno, "coordinate outside mesh");
    pairs.push_back(p);
    weight_sum += p.weight;
  }
  if (pairs.empty() || weight_sum <= 0.0)
    throw EmptyTrace("trace has no positive-weight pairs");
  return TrafficPattern::trace(std::move(pairs), rate);
}

inline TrafficPattern load_trace(const std::string& path, const SimConfig& cfg,
                                 double rate) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path);
  return parse_trace(in, cfg, rate);
}

inline std::string serialize_trace(const TrafficPattern& p) {
  std::string out = "noctrace v1\n";
  char buf[64];
  for (const TracePair& pr : p.pairs) {
    out += std::to_string(pr.src.x) + ' ' + std::to_string(pr.src.y) + ' ' +
           std::to_string(pr.dest.x) + ' ' + std::to_string(pr.dest.y) + ' ';
    auto res = std::to_chars(buf, buf + sizeof buf, pr.weight);
    out.append(buf, res.ptr);
    out += '\n';
  }
  return out;
}

/// Stand-in for the unavailable telecom benchmark: 30 tasks on distinct
/// nodes, one flow per task, Zipf-like weights so a few flows carry almost
/// all the load and most node pairs see none.
inline TrafficPattern bundled_telecom_like(const SimConfig& cfg,
                                           std::uint64_t seed,
                                           double rate = 0.0) {
  constexpr int kTasks = 30;
  if (cfg.node_count() < kTasks)
    throw MeshTooSmall("telecom workload needs at least 30 nodes");
  std::mt19937_64 rng(splitmix64(seed ^ 0x7e1ec0a3ULL));
  std::vector<int> nodes(static_cast<std::size_t>(cfg.node_count()));
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = static_cast<int>(i);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (nodes.size() - i));
    std::swap(nodes[i], nodes[j]);
  }
  std::vector<TracePair> pairs;
  for (int i = 0; i < kTasks; ++i) {
    int peer = static_cast<int>(rng() % (kTasks - 1));
    if (peer >= i) ++peer;
    TracePair p;
    p.src = cfg.coord_of(nodes[static_cast<std::size_t>(i)]);
    p.dest = cfg.coord_of(nodes[static_cast<std::size_t>(peer)]);
    // Zipf-like: the top fifth of the flows carries roughly 80% of the load
    p.weight = std::pow(static_cast<double>(i + 1), -1.6);
    pairs.push_back(p);
  }
  return TrafficPattern::trace(std::move(pairs), rate);
}

// ---------------------------------------------------------------------------
// Injection process: one Bernoulli packet trial per node per cycle, drawn
// from a counter-based stream so the sequence depends only on
// (seed, node, cycle).

class Injector {
 public:
  Injector(const TrafficPattern& pattern, const SimConfig& cfg)
      : pattern_(pattern), cfg_(cfg) {
    if (pattern_.kind == TrafficPattern::Kind::Uniform) return;
    node_prob_.assign(static_cast<std::size_t>(cfg.node_count()), 0.0);
    node_pairs_.resize(static_cast<std::size_t>(cfg.node_count()));
    double weight_sum = 0.0;
    for (const TracePair& p : pattern_.pairs) weight_sum += p.weight;
    const double packets_per_cycle =
        pattern_.rate * cfg.node_count() / cfg.packet_len;
    for (const TracePair& p : pattern_.pairs) {
      if (p.weight <= 0.0) continue;
      const auto n = static_cast<std::size_t>(cfg.node_index(p.src));
      node_prob_[n] += packets_per_cycle * (p.weight / weight_sum);
      auto& cum = node_pairs_[n];
      const double prev = cum.empty() ? 0.0 : cum.back().second;
      cum.emplace_back(p.dest, prev + p.weight);
    }
    for (auto& prob : node_prob_) prob = std::min(prob, 1.0);
  }

  /// Destination of a packet created at (node, cycle), if the trial fires.
  std::optional<Coord> maybe_inject(Coord node, std::int64_t cycle) const {
    const auto n = static_cast<std::uint64_t>(cfg_.node_index(node));
    const auto c = static_cast<std::uint64_t>(cycle);
    if (pattern_.kind == TrafficPattern::Kind::Uniform) {
      const double p = pattern_.rate / cfg_.packet_len;
      if (unit_draw(cfg_.seed, n, c, 0xA5) >= p) return std::nullopt;
      auto pick = static_cast<int>(unit_draw(cfg_.seed, n, c, 0xB7) *
                                   (cfg_.node_count() - 1));
      if (pick >= cfg_.node_index(node)) ++pick;  // skip self
      return cfg_.coord_of(pick);
    }
    const auto ni = static_cast<std::size_t>(cfg_.node_index(node));
    if (node_prob_[ni] <= 0.0) return std::nullopt;
    if (unit_draw(cfg_.seed, n, c, 0xA5) >= node_prob_[ni]) return std::nullopt;
    const auto& cum = node_pairs_[ni];
    const double r = unit_draw(cfg_.seed, n, c, 0xC9) * cum.back().second;
    for (const auto& [dest, edge] : cum)
      if (r < edge) return dest;
    return cum.back().first;
  }

  const TrafficPattern& pattern() const { return pattern_; }

 private:
  TrafficPattern pattern_;
  SimConfig cfg_;
  std::vector<double> node_prob_;
  std::vector<std::vector<std::pair<Coord, double>>> node_pairs_;
};

/// Builds the pattern selected by cfg.traffic with cfg.injection_rate.
/// telecom30 always refers to the fixed seed-1 workload that ships with the
/// repository, so different run seeds share one workload.
inline TrafficPattern pattern_from_config(const SimConfig& cfg) {
  if (cfg.traffic == "uniform")
    return TrafficPattern::uniform(cfg.injection_rate);
  if (cfg.traffic == "telecom30")
    return bundled_telecom_like(cfg, 1, cfg.injection_rate);
  if (cfg.traffic.rfind("trace:", 0) == 0)
    return load_trace(cfg.traffic.substr(6), cfg, cfg.injection_rate);
  throw ConfigError("unknown traffic pattern: " + cfg.traffic);
}

}  // namespace noctsim
