#pragma once

#include <algorithm>
#include <cstdlib>
#include <map>
#include <vector>

#include "noctsim/core.hpp"

namespace noctsim {

/// Routing input for one head flit at one node.
struct RouteRequest {
  Coord current{};
  Coord dest{};
  Direction arrival_dir = Direction::Local;  // port the head arrived on
  int misroutes_used = 0;
};

struct RouteDecision {
  enum class Outcome { Eject, Output, Stall, Drop };
  Outcome outcome = Outcome::Stall;
  Direction dir = Direction::Local;
  bool misroute = false;  // set when the output came from a detour

  static RouteDecision eject() { return {Outcome::Eject, Direction::Local, false}; }
  static RouteDecision output(Direction d, bool mis = false) {
    return {Outcome::Output, d, mis};
  }
  static RouteDecision stall() { return {Outcome::Stall, Direction::Local, false}; }
  static RouteDecision drop() { return {Outcome::Drop, Direction::Local, false}; }
};

/// Odd-even turn rules over travel directions. `from` is the direction the
/// packet is moving in (not the arrival port). U-turns are never legal;
/// EN/ES turns are prohibited in even columns, NW/SW turns in odd columns.
inline bool is_turn_legal(Direction from, Direction to, Parity parity) {
  assert(from != Direction::Local && to != Direction::Local);
  if (to == opposite(from)) return false;
  if (parity == Parity::Even) {
    if (from == Direction::East &&
        (to == Direction::North || to == Direction::South))
      return false;
  } else {
    if ((from == Direction::North || from == Direction::South) &&
        to == Direction::West)
      return false;
  }
  return true;
}

inline bool link_healthy(Coord c, Direction d, const FaultMap& faults,
                         const SimConfig& cfg) {
  auto n = neighbor(c, d, cfg);
  return n.has_value() && !faults.link_failed(c, *n);
}

namespace detail {

inline Direction travel_of(const RouteRequest& r) {
  return r.arrival_dir == Direction::Local ? Direction::Local
                                           : opposite(r.arrival_dir);
}

/// Minimal directions that keep the packet deliverable under the odd-even
/// rules. On top of existence, health and turn legality this applies the two
/// standard odd-even restrictions that make minimal routing complete:
/// eastbound traffic must not enter an even destination column while a
/// vertical offset remains (it could not turn there), and westbound traffic
/// may only move vertically in even columns (west turns are illegal in odd
/// ones). Ordered East, West, North, South.
inline std::vector<Direction> admissible_base(const RouteRequest& r,
                                              const FaultMap& faults,
                                              const SimConfig& cfg) {
  assert(r.current != r.dest);
  const int dx = r.dest.x - r.current.x;
  const int dy = r.dest.y - r.current.y;
  const Direction travel = travel_of(r);
  std::vector<Direction> out;
  auto consider = [&](Direction d) {
    if (!link_healthy(r.current, d, faults, cfg)) return;
    if (travel != Direction::Local &&
        !is_turn_legal(travel, d, column_parity(r.current)))
      return;
    out.push_back(d);
  };
  if (dx > 0 && !(dy != 0 && dx == 1 && r.dest.x % 2 == 0)) consider(Direction::East);
  if (dx < 0) consider(Direction::West);
  if (dy != 0 && !(dx < 0 && r.current.x % 2 != 0))
    consider(dy > 0 ? Direction::North : Direction::South);
  return out;
}

/// Detour candidates in preference order: the non-minimal perpendicular of
/// each blocked dimension, x-dimension blockage first, top before down when
/// the destination row gives no preference.
inline std::vector<Direction> detour_candidates(const RouteRequest& r) {
  const int dx = r.dest.x - r.current.x;
  const int dy = r.dest.y - r.current.y;
  std::vector<Direction> cands;
  auto add = [&](Direction d) {
    if (std::find(cands.begin(), cands.end(), d) == cands.end())
      cands.push_back(d);
  };
  if (dx != 0) {
    if (dy > 0) add(Direction::South);
    else if (dy < 0) add(Direction::North);
    else { add(Direction::North); add(Direction::South); }
  }
  if (dy != 0) {
    if (dx > 0) add(Direction::West);
    else if (dx < 0) add(Direction::East);
    else { add(Direction::East); add(Direction::West); }
  }
  return cands;
}

inline bool base_move_legal(const RouteRequest& r, Direction d,
                            const FaultMap& faults, const SimConfig& cfg) {
  if (!link_healthy(r.current, d, faults, cfg)) return false;
  const Direction travel = travel_of(r);
  return travel == Direction::Local ||
         is_turn_legal(travel, d, column_parity(r.current));
}

/// True when a packet sitting at `at`, moving in direction `travel`, has no
/// legal move at all toward `dest`: with a static fault map such a state is
/// a permanent stall. Used to refuse moves into it one hop ahead, the way
/// the fault-tolerant turn routing detours before the dead link.
inline bool dead_end(Coord at, Direction travel, Coord dest,
                     const FaultMap& faults, const SimConfig& cfg) {
  if (at == dest) return false;
  const RouteRequest probe{at, dest, opposite(travel), 0};
  if (!admissible_base(probe, faults, cfg).empty()) return false;
  for (Direction d : detour_candidates(probe))
    if (base_move_legal(probe, d, faults, cfg)) return false;
  return true;
}

}  // namespace detail

/// Minimal admissible directions; with faults present, moves that would
/// strand the packet in a dead end one hop ahead are excluded as well.
inline std::vector<Direction> admissible_outputs(const RouteRequest& r,
                                                 const FaultMap& faults,
                                                 const SimConfig& cfg) {
  std::vector<Direction> out = detail::admissible_base(r, faults, cfg);
  if (!faults.empty())
    std::erase_if(out, [&](Direction d) {
      return detail::dead_end(*neighbor(r.current, d, cfg), d, r.dest, faults,
                              cfg);
    });
  return out;
}

RouteDecision detour(const RouteRequest& r, const FaultMap& faults,
                     const SimConfig& cfg);

/// Picks among the admissible outputs: most downstream free space first,
/// then the larger remaining hop count along the direction's dimension,
/// then the fixed order E, W, N, S. Falls back to detour when nothing
/// minimal is available.
inline RouteDecision select_output(const RouteRequest& r,
                                   const std::vector<Direction>& admissible,
                                   const std::map<Direction, int>& downstream_space,
                                   const FaultMap& faults, const SimConfig& cfg) {
  if (r.current == r.dest) return RouteDecision::eject();
  if (admissible.empty()) return detour(r, faults, cfg);
  const int adx = std::abs(r.dest.x - r.current.x);
  const int ady = std::abs(r.dest.y - r.current.y);
  auto hops_along = [&](Direction d) {
    return (d == Direction::East || d == Direction::West) ? adx : ady;
  };
  auto space = [&](Direction d) {
    auto it = downstream_space.find(d);
    return it == downstream_space.end() ? 0 : it->second;
  };
  Direction best = admissible.front();
  for (std::size_t i = 1; i < admissible.size(); ++i) {
    Direction d = admissible[i];
    if (space(d) > space(best) ||
        (space(d) == space(best) && hops_along(d) > hops_along(best)))
      best = d;
  }
  return RouteDecision::output(best);
}

/// One-hop perpendicular escape when no minimal direction is admissible.
/// Drops once the misroute budget is spent; stalls when no legal
/// perpendicular exists (or all of them lead straight into dead ends).
inline RouteDecision detour(const RouteRequest& r, const FaultMap& faults,
                            const SimConfig& cfg) {
  if (r.misroutes_used >= cfg.misroute_limit()) return RouteDecision::drop();
  for (Direction d : detail::detour_candidates(r)) {
    if (!detail::base_move_legal(r, d, faults, cfg)) continue;
    if (!faults.empty() &&
        detail::dead_end(*neighbor(r.current, d, cfg), d, r.dest, faults, cfg))
      continue;
    return RouteDecision::output(d, true);
  }
  return RouteDecision::stall();
}

/// Full per-hop decision for a head flit.
inline RouteDecision route_decide(const RouteRequest& r, const FaultMap& faults,
                                  const SimConfig& cfg,
                                  const std::map<Direction, int>& downstream_space) {
  if (r.current == r.dest) return RouteDecision::eject();
  return select_output(r, admissible_outputs(r, faults, cfg), downstream_space,
                       faults, cfg);
}

}  // namespace noctsim
