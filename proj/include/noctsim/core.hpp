#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace noctsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FaultGenerationFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonSquareMesh : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Geometry

enum class Direction : std::uint8_t { East, West, North, South, Local };

/// Link directions in the canonical tie-break order used everywhere.
inline constexpr std::array<Direction, 4> kLinkDirections{
    Direction::East, Direction::West, Direction::North, Direction::South};

constexpr Direction opposite(Direction d) {
  switch (d) {
    case Direction::East: return Direction::West;
    case Direction::West: return Direction::East;
    case Direction::North: return Direction::South;
    case Direction::South: return Direction::North;
    default: return Direction::Local;
  }
}

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::East: return "East";
    case Direction::West: return "West";
    case Direction::North: return "North";
    case Direction::South: return "South";
    default: return "Local";
  }
}

/// Mesh coordinate. x grows East, y grows North; columns are x values.
struct Coord {
  int x = 0;
  int y = 0;
  friend constexpr auto operator<=>(const Coord&, const Coord&) = default;
};

enum class Parity { Even, Odd };

constexpr Parity column_parity(Coord c) {
  return c.x % 2 == 0 ? Parity::Even : Parity::Odd;
}

// ---------------------------------------------------------------------------
// Configuration

enum class Scheme { SAMQ, DAMQA, DAMQS, DAMQAS };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::SAMQ: return "SAMQ";
    case Scheme::DAMQA: return "DAMQA";
    case Scheme::DAMQS: return "DAMQS";
    default: return "DAMQAS";
  }
}

inline std::optional<Scheme> parse_scheme(std::string_view s) {
  if (s == "SAMQ") return Scheme::SAMQ;
  if (s == "DAMQA") return Scheme::DAMQA;
  if (s == "DAMQS") return Scheme::DAMQS;
  if (s == "DAMQAS") return Scheme::DAMQAS;
  return std::nullopt;
}

struct SimConfig {
  int width = 8;
  int height = 8;
  int vc_count = 4;
  int packet_len = 32;
  Scheme scheme = Scheme::SAMQ;
  int vb = 4;           // per-VC depth, SAMQ/DAMQA
  int shared_size = 16; // per-port-equivalent flits, DAMQS/DAMQAS
  double injection_rate = 0.1; // flits/cycle/node
  double fault_rate = 0.0;     // fraction of undirected links failed
  std::uint64_t seed = 1;
  std::int64_t warmup_cycles = 10000;
  std::int64_t measure_cycles = 50000;
  std::int64_t drain_limit_cycles = 100000;
  std::string traffic = "uniform"; // uniform | trace:<path> | telecom30
  int misroute_budget = 0;         // 0 selects the default 4*(width+height)

  int node_count() const { return width * height; }

  bool in_bounds(Coord c) const {
    return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
  }

  int node_index(Coord c) const { return c.y * width + c.x; }
  Coord coord_of(int idx) const { return {idx % width, idx / width}; }

  int misroute_limit() const {
    return misroute_budget > 0 ? misroute_budget : 4 * (width + height);
  }

  // Injection/ejection FIFOs sit outside the scheme under test.
  int injection_fifo_depth() const { return vc_count * vb; }

  void validate() const {
    if (width < 2 || height < 2)
      throw ConfigError("mesh must be at least 2x2");
    if (vc_count < 1) throw ConfigError("vc_count must be >= 1");
    if (packet_len < 2) throw ConfigError("packet_len must be >= 2");
    if (vb < 1) throw ConfigError("vb must be >= 1");
    if (shared_size < 2 * vc_count)
      throw ConfigError("shared_size must be >= 2*vc_count");
    if (fault_rate < 0.0 || fault_rate >= 1.0)
      throw ConfigError("fault_rate must be in [0,1)");
    if (injection_rate < 0.0) throw ConfigError("injection_rate must be >= 0");
    if (warmup_cycles < 0 || measure_cycles < 1 || drain_limit_cycles < 0)
      throw ConfigError("cycle windows must be nonnegative (measure >= 1)");
    if (misroute_budget < 0) throw ConfigError("misroute_budget must be >= 0");
  }
};

inline std::optional<Coord> neighbor(Coord c, Direction d, const SimConfig& cfg) {
  assert(d != Direction::Local);
  Coord n = c;
  switch (d) {
    case Direction::East: n.x += 1; break;
    case Direction::West: n.x -= 1; break;
    case Direction::North: n.y += 1; break;
    case Direction::South: n.y -= 1; break;
    default: return std::nullopt;
  }
  if (!cfg.in_bounds(n)) return std::nullopt;
  return n;
}

// ---------------------------------------------------------------------------
// Flits

struct Flit {
  enum class Kind : std::uint8_t { Head, Body, Tail };
  Kind kind = Kind::Head;
  std::uint64_t packet_id = 0;
  Coord src{};
  Coord dest{};
  int seq = 0;
  std::int64_t created_cycle = 0;
};

inline Flit::Kind flit_kind(int seq, int packet_len) {
  if (seq == 0) return Flit::Kind::Head;
  if (seq == packet_len - 1) return Flit::Kind::Tail;
  return Flit::Kind::Body;
}

// ---------------------------------------------------------------------------
// Faults

struct LinkId {
  Coord from{};
  Direction dir = Direction::East;
  friend constexpr auto operator<=>(const LinkId&, const LinkId&) = default;
};

/// Permanent faults for one run. Link faults are undirected: both directed
/// links of a node pair fail together. A failed node fails every incident
/// link.
class FaultMap {
 public:
  void fail_link(Coord a, Coord b) { failed_links_.insert(normalize(a, b)); }
  void fail_node(Coord n) { failed_nodes_.insert(n); }

  bool node_failed(Coord n) const { return failed_nodes_.count(n) > 0; }

  bool link_failed(Coord a, Coord b) const {
    if (node_failed(a) || node_failed(b)) return true;
    return failed_links_.count(normalize(a, b)) > 0;
  }

  bool empty() const { return failed_links_.empty() && failed_nodes_.empty(); }
  std::size_t failed_link_count() const { return failed_links_.size(); }
  const std::set<std::pair<Coord, Coord>>& failed_links() const {
    return failed_links_;
  }

 private:
  static std::pair<Coord, Coord> normalize(Coord a, Coord b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  std::set<std::pair<Coord, Coord>> failed_links_;
  std::set<Coord> failed_nodes_;
};

inline std::int64_t undirected_link_count(int w, int h) {
  return 2LL * w * h - w - h;
}

/// All undirected links of the mesh, as (node, East/North) half-links.
inline std::vector<LinkId> enumerate_links(const SimConfig& cfg) {
  std::vector<LinkId> links;
  links.reserve(static_cast<std::size_t>(undirected_link_count(cfg.width, cfg.height)));
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      if (x + 1 < cfg.width) links.push_back({{x, y}, Direction::East});
      if (y + 1 < cfg.height) links.push_back({{x, y}, Direction::North});
    }
  return links;
}

namespace detail {

inline bool survivor_connected(const SimConfig& cfg, const FaultMap& faults) {
  const int n = cfg.node_count();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<Coord> stack{{0, 0}};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    Coord c = stack.back();
    stack.pop_back();
    for (Direction d : kLinkDirections) {
      auto nb = neighbor(c, d, cfg);
      if (!nb || faults.link_failed(c, *nb)) continue;
      int idx = cfg.node_index(*nb);
      if (!seen[static_cast<std::size_t>(idx)]) {
        seen[static_cast<std::size_t>(idx)] = 1;
        ++visited;
        stack.push_back(*nb);
      }
    }
  }
  return visited == n;
}

}  // namespace detail

/// Samples round(fault_rate * L) distinct undirected link faults, resampling
/// until the survivor graph is connected. Deterministic in cfg.seed.
inline FaultMap generate_faults(const SimConfig& cfg) {
  const auto links = enumerate_links(cfg);
  const auto count = static_cast<std::size_t>(
      std::llround(cfg.fault_rate * static_cast<double>(links.size())));
  FaultMap result;
  if (count == 0) return result;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<LinkId> pool = links;
    FaultMap candidate;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
      std::swap(pool[i], pool[j]);
      auto to = neighbor(pool[i].from, pool[i].dir, cfg);
      candidate.fail_link(pool[i].from, *to);
    }
    if (detail::survivor_connected(cfg, candidate)) return candidate;
  }
  throw FaultGenerationFailed(
      "no connected survivor graph found in 1000 attempts");
}

/// Total inter-router buffer space: (N*PHY - 4*sqrt(N)) * VC * VB with
/// PHY = 4, which equals directed-link-count * VC * VB on a square mesh.
inline std::int64_t buf_total(const SimConfig& cfg) {
  if (cfg.width != cfg.height)
    throw NonSquareMesh("buf_total is defined for square meshes only");
  const std::int64_t n = cfg.node_count();
  return (n * 4 - 4 * cfg.width) * cfg.vc_count * cfg.vb;
}

// ---------------------------------------------------------------------------
// Deterministic counter-based draws (schedule-independent injection)

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform draw in [0,1) keyed by (seed, a, b, salt); no mutable state.
inline double unit_draw(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                        std::uint64_t salt) {
  std::uint64_t x = splitmix64(seed ^ splitmix64(a * 0xd1342543de82ef95ULL));
  x = splitmix64(x ^ splitmix64(b * 0xaf251af3b0f025b5ULL));
  x = splitmix64(x ^ salt);
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace noctsim
