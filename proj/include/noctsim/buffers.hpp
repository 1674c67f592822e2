#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>

#include "noctsim/core.hpp"

namespace noctsim {

struct UnknownVc : std::logic_error {
  using std::logic_error::logic_error;
};
struct BufferFull : std::logic_error {
  using std::logic_error::logic_error;
};
struct EmptyQueue : std::logic_error {
  using std::logic_error::logic_error;
};
struct CapacityTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One virtual-channel lane of a buffer instance: input port plus VC index.
struct VcKey {
  Direction port = Direction::Local;
  int vc = 0;
  friend constexpr auto operator<=>(const VcKey&, const VcKey&) = default;
};

/// Static shape of one buffer instance: which ports share it, its capacity,
/// how its lanes split into the two self-compacting regions, and the per-cycle
/// port budgets.
struct BufferLayoutSpec {
  Scheme scheme = Scheme::SAMQ;
  std::vector<Direction> member_ports;
  int vc_count = 0;  // lanes per member port
  int capacity = 0;  // flits
  int vb = 0;        // per-VC bound, SAMQ only
  std::vector<VcKey> low_end_group;
  std::vector<VcKey> high_end_group;
  int reserve_per_vc = 2;
  int read_budget = 1;
  int write_budget = 1;

  bool dynamic() const { return scheme != Scheme::SAMQ; }

  std::vector<VcKey> keys() const {
    std::vector<VcKey> all = low_end_group;
    all.insert(all.end(), high_end_group.begin(), high_end_group.end());
    return all;
  }
};

namespace detail {

inline std::vector<VcKey> lanes_of(const std::vector<Direction>& ports,
                                   int vc_count) {
  std::vector<VcKey> keys;
  for (Direction p : ports)
    for (int v = 0; v < vc_count; ++v) keys.push_back({p, v});
  return keys;
}

inline bool is_x_dim(Direction d) {
  return d == Direction::East || d == Direction::West;
}

}  // namespace detail

/// SAMQ: one statically partitioned buffer per port, vb slots per VC.
inline BufferLayoutSpec samq_layout(Direction port, int vc_count, int vb) {
  BufferLayoutSpec s;
  s.scheme = Scheme::SAMQ;
  s.member_ports = {port};
  s.vc_count = vc_count;
  s.vb = vb;
  s.capacity = vc_count * vb;
  s.low_end_group = detail::lanes_of(s.member_ports, vc_count);
  s.read_budget = s.write_budget = 1;
  return s;
}

/// DAMQA: one self-compacting buffer per port, all lanes share the space.
inline BufferLayoutSpec damqa_layout(Direction port, int vc_count, int vb) {
  BufferLayoutSpec s;
  s.scheme = Scheme::DAMQA;
  s.member_ports = {port};
  s.vc_count = vc_count;
  s.capacity = vc_count * vb;
  s.low_end_group = detail::lanes_of(s.member_ports, vc_count);
  s.read_budget = s.write_budget = 1;
  return s;
}

/// DAMQS: the {East,South} or {West,North} port pair shares one buffer.
/// The X-dimension lanes fill from the low end, the Y-dimension lanes from
/// the high end. Boundary nodes pass only the ports they actually have.
inline BufferLayoutSpec damqs_layout(const std::vector<Direction>& present,
                                     int vc_count, int shared_size) {
  BufferLayoutSpec s;
  s.scheme = Scheme::DAMQS;
  s.member_ports = present;
  s.vc_count = vc_count;
  s.capacity = shared_size * static_cast<int>(present.size());
  for (Direction p : present) {
    auto& group = detail::is_x_dim(p) ? s.low_end_group : s.high_end_group;
    for (int v = 0; v < vc_count; ++v) group.push_back({p, v});
  }
  s.read_budget = s.write_budget = static_cast<int>(present.size());
  return s;
}

/// DAMQAS: every present port of the node shares a single buffer; East/West
/// lanes grow from the low end, North/South from the high end.
inline BufferLayoutSpec damqas_layout(const std::vector<Direction>& present,
                                      int vc_count, int shared_size) {
  BufferLayoutSpec s = damqs_layout(present, vc_count, shared_size);
  s.scheme = Scheme::DAMQAS;
  return s;
}

/// One buffer instance at run time.
///
/// The functional model is a FIFO per lane plus the reserve accounting:
/// reserve(v) = max(0, reserve_per_vc - occupancy(v)), and a lane may accept
/// a flit iff its own reserve is not used up or the shared pool
/// free_unreserved = capacity - total - sum(reserve) is positive. SAMQ lanes
/// instead enforce the static bound occupancy(v) < vb.
///
/// The two regions are accounting-only: each region keeps its flits in
/// arrival order, a push appends at the region tail for free, and a pop from
/// position k shifts the (len-after-removal - k) entries behind it, which is
/// what shift_ops() accumulates.
class SharedBufferState {
 public:
  explicit SharedBufferState(BufferLayoutSpec spec) : spec_(std::move(spec)) {
    const auto all = spec_.keys();
    if (spec_.dynamic() &&
        spec_.capacity < spec_.reserve_per_vc * static_cast<int>(all.size()))
      throw CapacityTooSmall("capacity below total reserved slots");
    if (!spec_.dynamic() &&
        spec_.capacity != spec_.vb * static_cast<int>(all.size()))
      throw CapacityTooSmall("SAMQ capacity must equal vc_count*vb per port");
    int i = 0;
    for (const VcKey& k : all) index_.emplace(k, i++);
    keys_ = all;
    lanes_.resize(all.size());
    lane_in_low_.assign(all.size(), true);
    for (const VcKey& k : spec_.high_end_group)
      lane_in_low_[static_cast<std::size_t>(index_.at(k))] = false;
    if (spec_.dynamic())
      reserve_total_ = spec_.reserve_per_vc * static_cast<int>(all.size());
  }

  const BufferLayoutSpec& spec() const { return spec_; }

  bool has_vc(VcKey v) const { return index_.count(v) > 0; }

  int occupancy(VcKey v) const {
    return static_cast<int>(lanes_[lane_index(v)].size());
  }

  int total_occupancy() const { return total_; }

  /// Shared slots not spoken for by per-VC reserves (dynamic schemes).
  int free_unreserved() const {
    return spec_.capacity - total_ - reserve_total_;
  }

  bool can_accept(VcKey v) const {
    const auto& lane = lanes_[lane_index(v)];
    if (!spec_.dynamic()) return static_cast<int>(lane.size()) < spec_.vb;
    return static_cast<int>(lane.size()) < spec_.reserve_per_vc ||
           free_unreserved() > 0;
  }

  /// can_accept as if the listed extra flits (per lane) had already arrived.
  /// Used by the switch stage to account for same-cycle grants in flight.
  bool can_accept_assuming(VcKey v, const std::map<VcKey, int>& pending) const {
    int occ_v = occupancy(v);
    if (auto it = pending.find(v); it != pending.end()) occ_v += it->second;
    if (!spec_.dynamic()) return occ_v < spec_.vb;
    if (occ_v < spec_.reserve_per_vc) return true;
    int total = total_;
    int reserve = reserve_total_;
    for (const auto& [key, extra] : pending) {
      const int occ = occupancy(key);
      total += extra;
      reserve += std::max(0, spec_.reserve_per_vc - (occ + extra)) -
                 std::max(0, spec_.reserve_per_vc - occ);
    }
    return spec_.capacity - total - reserve > 0;
  }

  void push(VcKey v, const Flit& f) {
    const std::size_t i = lane_index(v);
    if (!can_accept(v)) throw BufferFull("push without can_accept");
    if (spec_.dynamic()) {
      if (static_cast<int>(lanes_[i].size()) < spec_.reserve_per_vc)
        --reserve_total_;
      region_of(i).push_back(static_cast<int>(i));  // tail append: no shifts
    }
    lanes_[i].push_back(f);
    ++total_;
  }

  std::optional<Flit> front(VcKey v) const {
    const auto& lane = lanes_[lane_index(v)];
    if (lane.empty()) return std::nullopt;
    return lane.front();
  }

  Flit pop(VcKey v) {
    const std::size_t i = lane_index(v);
    auto& lane = lanes_[i];
    if (lane.empty()) throw EmptyQueue("pop from empty virtual channel");
    Flit f = lane.front();
    lane.pop_front();
    --total_;
    if (spec_.dynamic()) {
      if (static_cast<int>(lane.size()) < spec_.reserve_per_vc)
        ++reserve_total_;
      auto& region = region_of(i);
      auto it = std::find(region.begin(), region.end(), static_cast<int>(i));
      const auto pos = static_cast<std::size_t>(it - region.begin());
      region.erase(it);
      shift_ops_ += region.size() - pos;  // entries behind the hole move up
    }
    return f;
  }

  /// Purges every flit matched by victim in one call; survivors keep their
  /// relative FIFO order and freed slots return to the pool immediately.
  /// Returns the number of flits removed.
  int reclaim(const std::function<bool(const VcKey&, const Flit&)>& victim) {
    int purged = 0;
    for (auto* region : {&low_order_, &high_order_}) {
      std::vector<std::size_t> ordinal(lanes_.size(), 0);
      std::vector<int> kept;
      kept.reserve(region->size());
      std::uint64_t moves = 0, removed = 0;
      for (int lane_idx : *region) {
        const auto li = static_cast<std::size_t>(lane_idx);
        const Flit& f = lanes_[li][ordinal[li]++];
        if (victim(key_of(li), f)) {
          ++removed;
        } else {
          moves += removed;  // survivor shifts once per hole before it
          kept.push_back(lane_idx);
        }
      }
      if (removed == 0) continue;
      shift_ops_ += moves;
      *region = std::move(kept);
    }
    for (std::size_t i = 0; i < lanes_.size(); ++i) {
      auto& lane = lanes_[i];
      const int before = static_cast<int>(lane.size());
      std::deque<Flit> kept;
      for (const Flit& f : lane)
        if (!victim(key_of(i), f)) kept.push_back(f);
      const int gone = before - static_cast<int>(kept.size());
      if (gone == 0) continue;
      if (spec_.dynamic()) {
        reserve_total_ +=
            std::max(0, spec_.reserve_per_vc - static_cast<int>(kept.size())) -
            std::max(0, spec_.reserve_per_vc - before);
      }
      lane = std::move(kept);
      total_ -= gone;
      purged += gone;
    }
    return purged;
  }

  double usage() const {
    return spec_.capacity == 0
               ? 0.0
               : static_cast<double>(total_) / spec_.capacity;
  }

  std::uint64_t shift_ops() const { return shift_ops_; }

  bool empty() const { return total_ == 0; }

 private:
  std::size_t lane_index(VcKey v) const {
    auto it = index_.find(v);
    if (it == index_.end())
      throw UnknownVc(std::string("no such VC: ") + to_string(v.port) + "/" +
                      std::to_string(v.vc));
    return static_cast<std::size_t>(it->second);
  }

  VcKey key_of(std::size_t lane_idx) const { return keys_[lane_idx]; }

  std::vector<int>& region_of(std::size_t lane_idx) {
    return lane_in_low_[lane_idx] ? low_order_ : high_order_;
  }

  BufferLayoutSpec spec_;
  std::map<VcKey, int> index_;
  std::vector<VcKey> keys_;
  std::vector<std::deque<Flit>> lanes_;
  std::vector<bool> lane_in_low_;
  std::vector<int> low_order_;   // lane index per slot, arrival order
  std::vector<int> high_order_;
  int total_ = 0;
  int reserve_total_ = 0;  // sum of max(0, reserve_per_vc - occ)
  std::uint64_t shift_ops_ = 0;
};

}  // namespace noctsim
