#pragma once

// Reference model for the shared-buffer schemes. Everything is recomputed
// from scratch at each step and lanes are plain vectors; it shares no code
// path with SharedBufferState so the two can be compared outcome-for-outcome.

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "noctsim/buffers.hpp"

namespace noctsim::testing {

struct OracleBuffer {
  BufferLayoutSpec spec;
  std::map<VcKey, std::vector<Flit>> lanes;

  explicit OracleBuffer(BufferLayoutSpec s) : spec(std::move(s)) {
    for (const VcKey& k : spec.keys()) lanes[k] = {};
  }

  int occupancy(VcKey v) const {
    return static_cast<int>(lanes.at(v).size());
  }

  int total() const {
    int t = 0;
    for (const auto& [k, q] : lanes) t += static_cast<int>(q.size());
    return t;
  }

  int reserved() const {
    int r = 0;
    for (const auto& [k, q] : lanes)
      r += std::max(0, spec.reserve_per_vc - static_cast<int>(q.size()));
    return r;
  }

  int free_unreserved() const { return spec.capacity - total() - reserved(); }

  bool can_accept(VcKey v) const {
    if (spec.scheme == Scheme::SAMQ) return occupancy(v) < spec.vb;
    return occupancy(v) < spec.reserve_per_vc || free_unreserved() > 0;
  }

  bool push(VcKey v, const Flit& f) {
    if (!can_accept(v)) return false;
    lanes.at(v).push_back(f);
    return true;
  }

  std::optional<Flit> pop(VcKey v) {
    auto& q = lanes.at(v);
    if (q.empty()) return std::nullopt;
    Flit f = q.front();
    q.erase(q.begin());
    return f;
  }

  int reclaim(const std::function<bool(const VcKey&, const Flit&)>& victim) {
    int purged = 0;
    for (auto& [k, q] : lanes) {
      std::vector<Flit> kept;
      for (const Flit& f : q) {
        if (victim(k, f))
          ++purged;
        else
          kept.push_back(f);
      }
      q = std::move(kept);
    }
    return purged;
  }
};

// --------------------------------------------------------------------------
// Scripted replay: the acceptance gate feeds the same operation sequence to
// the oracle and to SharedBufferState and requires identical outcomes.

struct BufOp {
  enum class Kind { Push, Pop, Reclaim };
  Kind kind = Kind::Push;
  VcKey vc{};
  Flit flit{};
  std::uint64_t victim_mod = 2;
  std::uint64_t victim_rem = 0;
};

struct BufOutcome {
  enum class Kind { Accepted, Rejected, Popped, PoppedEmpty, Purged };
  Kind kind = Kind::Accepted;
  std::uint64_t value = 0;  // popped packet id, or purge count
  friend bool operator==(const BufOutcome&, const BufOutcome&) = default;
};

inline std::vector<BufOp> random_ops(const BufferLayoutSpec& spec,
                                     std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto keys = spec.keys();
  std::vector<BufOp> ops;
  ops.reserve(count);
  std::uint64_t next_id = 1;
  for (std::size_t i = 0; i < count; ++i) {
    BufOp op;
    const auto roll = rng() % 100;
    op.vc = keys[rng() % keys.size()];
    if (roll < 50) {
      op.kind = BufOp::Kind::Push;
      op.flit.packet_id = next_id++;
      op.flit.kind = Flit::Kind::Body;
    } else if (roll < 95) {
      op.kind = BufOp::Kind::Pop;
    } else {
      op.kind = BufOp::Kind::Reclaim;
      op.victim_mod = 2 + rng() % 4;
      op.victim_rem = rng() % op.victim_mod;
    }
    ops.push_back(op);
  }
  return ops;
}

inline std::vector<BufOutcome> oracle_replay(const BufferLayoutSpec& spec,
                                             const std::vector<BufOp>& ops) {
  OracleBuffer buf(spec);
  std::vector<BufOutcome> out;
  out.reserve(ops.size());
  for (const BufOp& op : ops) {
    switch (op.kind) {
      case BufOp::Kind::Push:
        out.push_back({buf.push(op.vc, op.flit) ? BufOutcome::Kind::Accepted
                                                : BufOutcome::Kind::Rejected,
                       op.flit.packet_id});
        break;
      case BufOp::Kind::Pop: {
        auto f = buf.pop(op.vc);
        out.push_back(f ? BufOutcome{BufOutcome::Kind::Popped, f->packet_id}
                        : BufOutcome{BufOutcome::Kind::PoppedEmpty, 0});
        break;
      }
      case BufOp::Kind::Reclaim: {
        const auto m = op.victim_mod, r = op.victim_rem;
        const int n = buf.reclaim([m, r](const VcKey&, const Flit& f) {
          return f.packet_id % m == r;
        });
        out.push_back({BufOutcome::Kind::Purged, static_cast<std::uint64_t>(n)});
        break;
      }
    }
  }
  return out;
}

inline std::vector<BufOutcome> production_replay(const BufferLayoutSpec& spec,
                                                 const std::vector<BufOp>& ops) {
  SharedBufferState buf(spec);
  std::vector<BufOutcome> out;
  out.reserve(ops.size());
  for (const BufOp& op : ops) {
    switch (op.kind) {
      case BufOp::Kind::Push:
        if (buf.can_accept(op.vc)) {
          buf.push(op.vc, op.flit);
          out.push_back({BufOutcome::Kind::Accepted, op.flit.packet_id});
        } else {
          out.push_back({BufOutcome::Kind::Rejected, op.flit.packet_id});
        }
        break;
      case BufOp::Kind::Pop:
        if (buf.front(op.vc)) {
          out.push_back({BufOutcome::Kind::Popped, buf.pop(op.vc).packet_id});
        } else {
          out.push_back({BufOutcome::Kind::PoppedEmpty, 0});
        }
        break;
      case BufOp::Kind::Reclaim: {
        const auto m = op.victim_mod, r = op.victim_rem;
        const int n = buf.reclaim([m, r](const VcKey&, const Flit& f) {
          return f.packet_id % m == r;
        });
        out.push_back({BufOutcome::Kind::Purged, static_cast<std::uint64_t>(n)});
        break;
      }
    }
  }
  return out;
}

/// Layouts used throughout the randomized suites: one of each scheme at
/// interior-node shape.
inline std::vector<BufferLayoutSpec> scheme_layouts(int vc_count = 4,
                                                    int vb = 4,
                                                    int shared_size = 16) {
  return {
      samq_layout(Direction::East, vc_count, vb),
      damqa_layout(Direction::East, vc_count, vb),
      damqs_layout({Direction::East, Direction::South}, vc_count, shared_size),
      damqas_layout({Direction::East, Direction::West, Direction::North,
                     Direction::South},
                    vc_count, shared_size),
  };
}

}  // namespace noctsim::testing
