#pragma once

#include <array>
#include <limits>
#include <set>

#include "noctsim/buffers.hpp"
#include "noctsim/routing.hpp"

namespace noctsim {

class Router;

/// Services a router stage needs from the surrounding network. The engine
/// implements this; unit tests stub it.
struct EngineHooks {
  virtual Router* router_at(Coord c) = 0;
  /// Reserve one downstream slot for a flit granted this cycle, accounting
  /// for this cycle's earlier grants into the same buffer. Flits ejecting at
  /// their destination or bound for a killed packet need no slot.
  virtual bool claim_downstream_slot(Coord node, VcKey vc, const Flit& f) = 0;
  virtual int misroutes_of(std::uint64_t packet) = 0;
  virtual void note_misroute(std::uint64_t packet) = 0;
  /// Terminate a packet whose head can make no progress at `where`. The
  /// engine purges the whole worm so the freed space is usable at once.
  virtual void request_kill(std::uint64_t packet, Router& where) = 0;
  virtual void on_packet_dropped(std::uint64_t packet) = 0;
  virtual void on_flits_purged(int n) = 0;
  virtual ~EngineHooks() = default;
};

/// One flit leaving a router this cycle; it lands downstream next cycle.
struct Departure {
  Flit flit{};
  Coord to{};
  VcKey down_vc{};
  bool eject = false;
};

enum class VcPhase { Idle, Routing, Active };

/// With a static fault map a routing stall can never clear, so a stalled
/// head gives up after this many cycles and releases its buffer space, the
/// local equivalent of terminating the occupancy of traffic aimed at a dead
/// link.
inline constexpr int kTrapStallLimit = 2;

inline constexpr int dir_index(Direction d) { return static_cast<int>(d); }

class Router {
 public:
  struct Lane {
    VcKey key{};
    VcPhase phase = VcPhase::Idle;
    Direction out = Direction::Local;
    VcKey down_vc{};
    bool eject = false;
    std::uint64_t packet = 0;
    int route_stalls = 0;
  };

  Router(Coord node, const SimConfig& cfg, const FaultMap& faults)
      : node_(node), cfg_(&cfg), faults_(&faults) {
    for (Direction d : kLinkDirections)
      if (neighbor(node, d, cfg)) link_ports_.push_back(d);

    switch (cfg.scheme) {
      case Scheme::SAMQ:
        for (Direction p : link_ports_)
          add_buffer(samq_layout(p, cfg.vc_count, cfg.vb));
        break;
      case Scheme::DAMQA:
        for (Direction p : link_ports_)
          add_buffer(damqa_layout(p, cfg.vc_count, cfg.vb));
        break;
      case Scheme::DAMQS: {
        for (auto pair : {std::pair{Direction::East, Direction::South},
                          std::pair{Direction::West, Direction::North}}) {
          std::vector<Direction> present;
          if (has_port(pair.first)) present.push_back(pair.first);
          if (has_port(pair.second)) present.push_back(pair.second);
          if (!present.empty())
            add_buffer(damqs_layout(present, cfg.vc_count, cfg.shared_size));
        }
        break;
      }
      case Scheme::DAMQAS:
        add_buffer(damqas_layout(link_ports_, cfg.vc_count, cfg.shared_size));
        break;
    }

    for (Direction p : link_ports_)
      for (int v = 0; v < cfg.vc_count; ++v) {
        Lane lane;
        lane.key = {p, v};
        lane_index_.emplace(lane.key, static_cast<int>(lanes_.size()));
        lanes_.push_back(lane);
      }
    Lane local;
    local.key = {Direction::Local, 0};
    lane_index_.emplace(local.key, static_cast<int>(lanes_.size()));
    lanes_.push_back(local);
    va_cursor_.fill(0);
    sw_cursor_.fill(0);
  }

  Coord node() const { return node_; }
  const std::vector<Direction>& link_ports() const { return link_ports_; }
  bool has_port(Direction d) const {
    return std::find(link_ports_.begin(), link_ports_.end(), d) !=
           link_ports_.end();
  }

  std::vector<SharedBufferState>& buffers() { return buffers_; }
  const std::vector<SharedBufferState>& buffers() const { return buffers_; }

  int buffer_index_for(Direction port) const { return port_buffer_.at(port); }

  SharedBufferState& buffer_for(Direction port) {
    return buffers_[static_cast<std::size_t>(port_buffer_.at(port))];
  }
  const SharedBufferState& buffer_for(Direction port) const {
    return buffers_[static_cast<std::size_t>(port_buffer_.at(port))];
  }

  Lane& lane(VcKey key) {
    return lanes_[static_cast<std::size_t>(lane_index_.at(key))];
  }
  const Lane& lane(VcKey key) const {
    return lanes_[static_cast<std::size_t>(lane_index_.at(key))];
  }
  const std::vector<Lane>& lanes() const { return lanes_; }

  /// Free slots of the buffer covering this input port (selection heuristic).
  int input_free_space(Direction port) const {
    const auto& b = buffer_for(port);
    return b.spec().capacity - b.total_occupancy();
  }

  // --- arrivals -----------------------------------------------------------

  bool is_killed(std::uint64_t packet) const { return kill_.count(packet) > 0; }

  /// True when the flit belongs to a killed packet and was swallowed.
  bool discard_if_killed(const Flit& f) {
    auto it = kill_.find(f.packet_id);
    if (it == kill_.end()) return false;
    if (f.kind == Flit::Kind::Tail) kill_.erase(it);
    return true;
  }

  void accept_flit(VcKey vc, const Flit& f) {
    Lane& ln = lane(vc);
    assert(ln.phase != VcPhase::Idle && "arrival into an unclaimed lane");
    buffer_for(vc.port).push(vc, f);
    if (f.kind == Flit::Kind::Head) {
      assert(ln.phase == VcPhase::Routing);
      assert(buffer_for(vc.port).occupancy(vc) == 1);
      ln.packet = f.packet_id;
    } else {
      assert(ln.packet == f.packet_id && "wormhole interleaving");
    }
  }

  // --- injection ----------------------------------------------------------

  void enqueue_packet(const std::vector<Flit>& flits) {
    source_queue_.insert(source_queue_.end(), flits.begin(), flits.end());
  }

  void fill_injection_fifo() {
    const auto depth = static_cast<std::size_t>(cfg_->injection_fifo_depth());
    while (injection_fifo_.size() < depth && !source_queue_.empty()) {
      injection_fifo_.push_back(source_queue_.front());
      source_queue_.pop_front();
    }
  }

  std::size_t source_queue_size() const { return source_queue_.size(); }
  std::size_t injection_fifo_size() const { return injection_fifo_.size(); }

  // --- per-cycle stages ----------------------------------------------------

  /// Switch allocation: per output port, round-robin over active lanes whose
  /// front flit can claim a downstream slot; at most one flit per output and
  /// one read per input port per cycle (which keeps every buffer instance
  /// within its read budget).
  std::vector<Departure> switch_stage(EngineHooks& hooks) {
    std::vector<Departure> out;
    std::array<bool, 5> port_read_used{};
    std::array<int, 8> buffer_reads{};
    for (Direction outdir : kLinkDirections) {
      auto down = neighbor(node_, outdir, *cfg_);
      if (!down || faults_->link_failed(node_, *down)) continue;
      auto& cursor = sw_cursor_[static_cast<std::size_t>(dir_index(outdir))];
      const std::size_t n = lanes_.size();
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t li = (cursor + k) % n;
        Lane& ln = lanes_[li];
        if (ln.phase != VcPhase::Active || ln.out != outdir) continue;
        const bool local = ln.key.port == Direction::Local;
        if (!local && port_read_used[static_cast<std::size_t>(dir_index(ln.key.port))])
          continue;
        auto f = front_of(ln);
        if (!f) continue;  // wormhole gap
        assert(f->packet_id == ln.packet);
        if (!ln.eject && !hooks.claim_downstream_slot(*down, ln.down_vc, *f))
          continue;
        Flit flit;
        if (local) {
          flit = injection_fifo_.front();
          injection_fifo_.pop_front();
        } else {
          flit = buffer_for(ln.key.port).pop(ln.key);
          port_read_used[static_cast<std::size_t>(dir_index(ln.key.port))] = true;
          ++buffer_reads[static_cast<std::size_t>(port_buffer_.at(ln.key.port))];
        }
        out.push_back({flit, *down, ln.down_vc, ln.eject});
        if (flit.kind == Flit::Kind::Tail) release_lane(ln);
        cursor = (li + 1) % n;
        break;
      }
    }
    for (std::size_t b = 0; b < buffers_.size(); ++b) {
      assert(buffer_reads[b] <= buffers_[b].spec().read_budget);
      (void)b;
    }
    return out;
  }

  /// Routing and VC allocation for every lane waiting on a head flit.
  void route_stage(EngineHooks& hooks) {
    for (Lane& ln : lanes_) {
      if (ln.key.port == Direction::Local && ln.phase == VcPhase::Idle &&
          !injection_fifo_.empty() &&
          injection_fifo_.front().kind == Flit::Kind::Head) {
        ln.phase = VcPhase::Routing;
        ln.packet = injection_fifo_.front().packet_id;
      }
      if (ln.phase != VcPhase::Routing) continue;
      auto f = front_of(ln);
      if (!f) continue;  // claimed lane, head still in flight
      assert(f->kind == Flit::Kind::Head);
      RouteRequest req{node_, f->dest, ln.key.port, hooks.misroutes_of(f->packet_id)};
      const auto spaces = downstream_spaces(hooks, f->dest);
      const RouteDecision dec = route_decide(req, *faults_, *cfg_, spaces);
      switch (dec.outcome) {
        case RouteDecision::Outcome::Output: {
          const Coord down = *neighbor(node_, dec.dir, *cfg_);
          if (down == f->dest) {
            ln.out = dec.dir;
            ln.eject = true;
            ln.phase = VcPhase::Active;
          } else {
            Router* dr = hooks.router_at(down);
            auto vc = vc_allocate(dec.dir, *dr);
            if (!vc) {
              ln.route_stalls = 0;  // VC contention, retry next cycle
              break;
            }
            ln.out = dec.dir;
            ln.down_vc = *vc;
            ln.eject = false;
            ln.phase = VcPhase::Active;
          }
          if (dec.misroute) hooks.note_misroute(f->packet_id);
          ln.route_stalls = 0;
          break;
        }
        case RouteDecision::Outcome::Stall:
          if (++ln.route_stalls >= kTrapStallLimit)
            hooks.request_kill(ln.packet, *this);
          break;
        case RouteDecision::Outcome::Drop:
          hooks.request_kill(ln.packet, *this);
          break;
        case RouteDecision::Outcome::Eject:
          assert(false && "flits for this node are consumed on arrival");
          break;
      }
    }
  }

  /// Claims an idle downstream lane on the port facing us, round-robin from
  /// the last granted index. A lane below its reserve always has room, so
  /// idle implies acceptable in practice; the can_accept check keeps the
  /// contract explicit.
  std::optional<VcKey> vc_allocate(Direction output, Router& down) {
    const Direction port = opposite(output);
    auto& cursor = va_cursor_[static_cast<std::size_t>(dir_index(output))];
    for (int k = 0; k < cfg_->vc_count; ++k) {
      const int idx = (cursor + k) % cfg_->vc_count;
      const VcKey key{port, idx};
      Lane& dl = down.lane(key);
      if (dl.phase != VcPhase::Idle) continue;
      if (!down.buffer_for(port).can_accept(key)) continue;
      dl.phase = VcPhase::Routing;
      dl.packet = 0;
      dl.route_stalls = 0;
      cursor = (idx + 1) % cfg_->vc_count;
      return key;
    }
    return std::nullopt;
  }

  /// Purges every packet whose assigned output is the failed direction and
  /// frees its lane; the buffer space returns to the pool in the same call.
  void on_fault_boundary(Direction failed, EngineHooks& hooks) {
    for (Lane& ln : lanes_)
      if (ln.phase == VcPhase::Active && ln.out == failed)
        purge_packet_local(ln.packet, hooks);
  }

  /// Frees this router's lanes and flits of the packet without any arrival
  /// bookkeeping; the engine uses it when it retires a worm everywhere at
  /// once. Returns the number of flits removed.
  int purge_packet_flits(std::uint64_t pid) {
    int purged = 0;
    for (Lane& ln : lanes_) {
      if (ln.phase == VcPhase::Idle || ln.packet != pid) continue;
      if (ln.key.port == Direction::Local) {
        for (auto* q : {&injection_fifo_, &source_queue_}) {
          const auto before = q->size();
          std::erase_if(*q, [&](const Flit& f) { return f.packet_id == pid; });
          purged += static_cast<int>(before - q->size());
        }
      } else {
        purged += buffer_for(ln.key.port)
                      .reclaim([&](const VcKey& k, const Flit& f) {
                        return k == ln.key && f.packet_id == pid;
                      });
      }
      release_lane(ln);
    }
    return purged;
  }

  /// Removes every locally held flit of the packet, frees its lanes, and
  /// arranges for late arrivals to be swallowed until the tail shows up.
  void purge_packet_local(std::uint64_t pid, EngineHooks& hooks) {
    bool tail_seen = false;
    int purged = 0;
    auto matches = [&](const Flit& f) {
      if (f.packet_id != pid) return false;
      if (f.kind == Flit::Kind::Tail) tail_seen = true;
      return true;
    };
    for (Lane& ln : lanes_) {
      if (ln.phase == VcPhase::Idle || ln.packet != pid) continue;
      if (ln.key.port == Direction::Local) {
        for (auto* q : {&injection_fifo_, &source_queue_}) {
          const auto before = q->size();
          std::erase_if(*q, matches);
          purged += static_cast<int>(before - q->size());
        }
      } else {
        purged += buffer_for(ln.key.port)
                      .reclaim([&](const VcKey& k, const Flit& f) {
                        return k == ln.key && matches(f);
                      });
      }
      release_lane(ln);
    }
    if (!tail_seen) kill_.insert(pid);
    hooks.on_flits_purged(purged);
    hooks.on_packet_dropped(pid);
  }

  // --- accounting ----------------------------------------------------------

  int total_capacity() const {
    int c = 0;
    for (const auto& b : buffers_) c += b.spec().capacity;
    return c;
  }
  int total_occupancy() const {
    int o = 0;
    for (const auto& b : buffers_) o += b.total_occupancy();
    return o;
  }
  std::uint64_t shift_ops() const {
    std::uint64_t s = 0;
    for (const auto& b : buffers_) s += b.shift_ops();
    return s;
  }

  bool empty() const {
    if (!source_queue_.empty() || !injection_fifo_.empty()) return false;
    for (const auto& b : buffers_)
      if (!b.empty()) return false;
    for (const Lane& ln : lanes_)
      if (ln.phase != VcPhase::Idle) return false;
    return true;
  }

 private:
  void add_buffer(BufferLayoutSpec spec) {
    const int idx = static_cast<int>(buffers_.size());
    for (Direction p : spec.member_ports) port_buffer_.emplace(p, idx);
    buffers_.emplace_back(std::move(spec));
  }

  std::optional<Flit> front_of(const Lane& ln) const {
    if (ln.key.port == Direction::Local) {
      if (injection_fifo_.empty()) return std::nullopt;
      return injection_fifo_.front();
    }
    return buffer_for(ln.key.port).front(ln.key);
  }

  void release_lane(Lane& ln) {
    assert(ln.key.port == Direction::Local ||
           buffer_for(ln.key.port).occupancy(ln.key) == 0);
    ln.phase = VcPhase::Idle;
    ln.packet = 0;
    ln.eject = false;
    ln.route_stalls = 0;
  }

  std::map<Direction, int> downstream_spaces(EngineHooks& hooks, Coord dest) {
    std::map<Direction, int> spaces;
    for (Direction d : kLinkDirections) {
      auto n = neighbor(node_, d, *cfg_);
      if (!n || faults_->link_failed(node_, *n)) continue;
      if (*n == dest) {
        spaces[d] = std::numeric_limits<int>::max();  // ejection is unbounded
        continue;
      }
      Router* r = hooks.router_at(*n);
      spaces[d] = r ? r->input_free_space(opposite(d)) : 0;
    }
    return spaces;
  }

  Coord node_;
  const SimConfig* cfg_;
  const FaultMap* faults_;
  std::vector<Direction> link_ports_;
  std::vector<SharedBufferState> buffers_;
  std::map<Direction, int> port_buffer_;
  std::vector<Lane> lanes_;
  std::map<VcKey, int> lane_index_;
  std::deque<Flit> injection_fifo_;
  std::deque<Flit> source_queue_;
  std::set<std::uint64_t> kill_;
  std::array<int, 4> va_cursor_{};
  std::array<std::size_t, 4> sw_cursor_{};
};

}  // namespace noctsim
