#pragma once

#include <numeric>

#include "noctsim/router.hpp"
#include "noctsim/traffic.hpp"

namespace noctsim {

struct MetricsReport {
  double avg_latency = 0.0;       // cycles, creation to tail ejection
  std::vector<std::int64_t> latency_histogram;  // 16-cycle buckets
  double throughput = 0.0;        // flits/cycle/node in the measure window
  double buffer_usage_rate = 0.0; // time-averaged occupied fraction
  std::int64_t injected_flits = 0;   // whole run
  std::int64_t delivered_flits = 0;  // whole run
  std::int64_t dropped_packets = 0;
  std::int64_t purged_flits = 0;
  std::uint64_t shift_ops_total = 0; // measure window
  bool saturated = false;
  bool drain_timeout = false;
  std::int64_t cycles_run = 0;
};

inline constexpr int kLatencyBucketWidth = 16;
inline constexpr int kLatencyBuckets = 128;

/// One simulation instance. Phases per cycle, in order: (1)+(2) ejection and
/// link traversal of last cycle's grants, (3) switch allocation, (4) routing
/// and VC allocation, (5) injection. A flit granted at cycle t sits in the
/// downstream buffer at t+1. Because routing runs after the switch, a head
/// arriving at cycle t departs at t+1: heads pay two cycles per hop, body
/// flits stream one per cycle behind them, and an unloaded packet takes
/// exactly 2*hops + packet_len cycles from creation to tail ejection.
class SimEngine final : public EngineHooks {
 public:
  explicit SimEngine(const SimConfig& cfg)
      : SimEngine(cfg, pattern_from_config(cfg)) {}

  SimEngine(const SimConfig& cfg, const TrafficPattern& pattern)
      : SimEngine(cfg, pattern, generate_faults(cfg)) {}

  SimEngine(const SimConfig& cfg, const TrafficPattern& pattern, FaultMap faults)
      : cfg_(cfg), faults_(std::move(faults)), injector_(pattern, cfg) {
    cfg_.validate();
    routers_.reserve(static_cast<std::size_t>(cfg_.node_count()));
    for (int i = 0; i < cfg_.node_count(); ++i)
      routers_.emplace_back(cfg_.coord_of(i), cfg_, faults_);
    report_.latency_histogram.assign(kLatencyBuckets, 0);
  }

  SimEngine(const SimEngine&) = delete;
  SimEngine& operator=(const SimEngine&) = delete;

  const SimConfig& config() const { return cfg_; }
  const FaultMap& faults() const { return faults_; }
  std::int64_t cycle() const { return cycle_; }
  bool network_empty() const { return in_network_ == 0; }
  std::int64_t delivered_packets() const { return delivered_packets_; }
  Router& router(Coord c) {
    return routers_[static_cast<std::size_t>(cfg_.node_index(c))];
  }

  /// Creates one packet at the current cycle (test hook; normal runs inject
  /// through the traffic pattern).
  void inject_packet(Coord src, Coord dest) { create_packet(src, dest); }

  void step() {
    arrive_and_eject();
    switch_all();
    route_all();
    inject_all();
    if (in_measure_window()) {
      usage_occ_accum_ += total_occupancy();
      if (!usage_cap_) usage_cap_ = total_capacity();
    }
    if (cycle_ + 1 == cfg_.warmup_cycles) shift_mark_ = total_shift_ops();
    if (cycle_ + 1 == active_cycles()) shift_end_ = total_shift_ops();
    check_conservation();
    ++cycle_;
  }

  MetricsReport run() {
    while (cycle_ < active_cycles()) step();
    while (!network_empty() && cycle_ < active_cycles() + cfg_.drain_limit_cycles)
      step();
    report_.drain_timeout = !network_empty();
    if (!report_.drain_timeout) assert_drained();
    finalize();
    return report_;
  }

  // --- EngineHooks ---------------------------------------------------------

  Router* router_at(Coord c) override {
    if (!cfg_.in_bounds(c)) return nullptr;
    return &router(c);
  }

  bool claim_downstream_slot(Coord node, VcKey vc, const Flit& f) override {
    if (f.dest == node) return true;
    Router& r = router(node);
    if (r.is_killed(f.packet_id)) return true;  // will be swallowed on arrival
    auto& pending = pending_[{cfg_.node_index(node), r.buffer_index_for(vc.port)}];
    if (!r.buffer_for(vc.port).can_accept_assuming(vc, pending)) return false;
    ++pending[vc];
    return true;
  }

  int misroutes_of(std::uint64_t packet) override {
    auto it = misroutes_.find(packet);
    return it == misroutes_.end() ? 0 : it->second;
  }
  void note_misroute(std::uint64_t packet) override { ++misroutes_[packet]; }

  /// Retires a dead worm in one shot: every router holding its flits frees
  /// them and flits on the wire vanish, so the space a hopeless packet held
  /// is usable by live traffic immediately.
  void request_kill(std::uint64_t packet, Router& where) override {
    (void)where;
    int purged = 0;
    for (Router& r : routers_) purged += r.purge_packet_flits(packet);
    const auto before = inflight_.size();
    std::erase_if(inflight_,
                  [&](const Hop& h) { return h.flit.packet_id == packet; });
    purged += static_cast<int>(before - inflight_.size());
    report_.purged_flits += purged;
    in_network_ -= purged;
    ++report_.dropped_packets;
    misroutes_.erase(packet);
  }

  void on_packet_dropped(std::uint64_t packet) override {
    ++report_.dropped_packets;
    misroutes_.erase(packet);
  }
  void on_flits_purged(int n) override {
    report_.purged_flits += n;
    in_network_ -= n;
  }

 private:
  struct Hop {
    Flit flit{};
    Coord to{};
    VcKey vc{};
    bool eject = false;
  };

  std::int64_t active_cycles() const {
    return cfg_.warmup_cycles + cfg_.measure_cycles;
  }
  bool in_measure_window() const {
    return cycle_ >= cfg_.warmup_cycles && cycle_ < active_cycles();
  }

  void arrive_and_eject() {
    for (const Hop& h : inflight_) {
      Router& r = router(h.to);
      if (h.flit.dest == h.to) {
        deliver(h.flit);
      } else if (r.discard_if_killed(h.flit)) {
        ++report_.purged_flits;
        --in_network_;
      } else {
        r.accept_flit(h.vc, h.flit);
      }
    }
    inflight_.clear();
  }

  void deliver(const Flit& f) {
    ++report_.delivered_flits;
    --in_network_;
    assert(f.seq == next_seq_[f.packet_id]++ && "out-of-order delivery");
    if (in_measure_window()) ++window_delivered_;
    if (f.kind == Flit::Kind::Tail) {
      next_seq_.erase(f.packet_id);
      ++delivered_packets_;
      misroutes_.erase(f.packet_id);
      if (in_measure_window()) {
        const auto latency = cycle_ - f.created_cycle;
        window_latency_sum_ += static_cast<double>(latency);
        ++window_packets_;
        auto bucket = static_cast<std::size_t>(latency / kLatencyBucketWidth);
        if (bucket >= report_.latency_histogram.size())
          bucket = report_.latency_histogram.size() - 1;
        ++report_.latency_histogram[bucket];
      }
    }
  }

  void switch_all() {
    pending_.clear();
    for (Router& r : routers_) {
      auto deps = r.switch_stage(*this);
      for (auto& d : deps) inflight_.push_back({d.flit, d.to, d.down_vc, d.eject});
    }
  }

  void route_all() {
    for (Router& r : routers_) r.route_stage(*this);
  }

  void inject_all() {
    const bool sources_on = cycle_ < active_cycles();
    for (Router& r : routers_) {
      if (sources_on)
        if (auto dest = injector_.maybe_inject(r.node(), cycle_))
          create_packet(r.node(), *dest);
      r.fill_injection_fifo();
    }
  }

  void create_packet(Coord src, Coord dest) {
    assert(src != dest);
    const std::uint64_t pid = next_packet_id_++;
    std::vector<Flit> flits(static_cast<std::size_t>(cfg_.packet_len));
    for (int s = 0; s < cfg_.packet_len; ++s) {
      flits[static_cast<std::size_t>(s)] = {flit_kind(s, cfg_.packet_len), pid,
                                            src, dest, s, cycle_};
    }
    router(src).enqueue_packet(flits);
    report_.injected_flits += cfg_.packet_len;
    in_network_ += cfg_.packet_len;
  }

  int total_occupancy() const {
    int o = 0;
    for (const Router& r : routers_) o += r.total_occupancy();
    return o;
  }
  int total_capacity() const {
    int c = 0;
    for (const Router& r : routers_) c += r.total_capacity();
    return c;
  }
  std::uint64_t total_shift_ops() const {
    std::uint64_t s = 0;
    for (const Router& r : routers_) s += r.shift_ops();
    return s;
  }

  // Flit conservation: created = delivered + purged + in network, with the
  // incremental in_network_ counter cross-checked by a full recount.
  void check_conservation() const {
    assert(report_.injected_flits ==
           report_.delivered_flits + report_.purged_flits + in_network_);
    if (cycle_ % 4096 == 0) {
      std::int64_t counted = static_cast<std::int64_t>(inflight_.size());
      for (const Router& r : routers_)
        counted += static_cast<std::int64_t>(r.source_queue_size()) +
                   static_cast<std::int64_t>(r.injection_fifo_size()) +
                   r.total_occupancy();
      assert(counted == in_network_);
      (void)counted;
    }
  }

  void assert_drained() const {
    for (const Router& r : routers_) {
      assert(r.empty());
      (void)r;
    }
    assert(inflight_.empty());
  }

  void finalize() {
    report_.cycles_run = cycle_;
    const double denom =
        static_cast<double>(cfg_.measure_cycles) * cfg_.node_count();
    report_.throughput = static_cast<double>(window_delivered_) / denom;
    report_.avg_latency =
        window_packets_ == 0 ? 0.0 : window_latency_sum_ / window_packets_;
    report_.buffer_usage_rate =
        usage_cap_ == 0 ? 0.0
                        : usage_occ_accum_ / (static_cast<double>(usage_cap_) *
                                              cfg_.measure_cycles);
    report_.shift_ops_total = shift_end_ - shift_mark_;
    const double offered = injector_.pattern().rate;
    report_.saturated = offered > 0.0 && report_.throughput < 0.95 * offered;
  }

  SimConfig cfg_;
  FaultMap faults_;
  Injector injector_;
  std::vector<Router> routers_;
  std::vector<Hop> inflight_;
  std::map<std::pair<int, int>, std::map<VcKey, int>> pending_;  // (node, buffer)
  std::map<std::uint64_t, int> misroutes_;
  std::map<std::uint64_t, int> next_seq_;
  MetricsReport report_;
  std::int64_t cycle_ = 0;
  std::uint64_t next_packet_id_ = 1;
  std::int64_t in_network_ = 0;
  std::int64_t delivered_packets_ = 0;
  std::int64_t window_delivered_ = 0;
  std::int64_t window_packets_ = 0;
  double window_latency_sum_ = 0.0;
  double usage_occ_accum_ = 0.0;
  std::int64_t usage_cap_ = 0;
  std::uint64_t shift_mark_ = 0;
  std::uint64_t shift_end_ = 0;
};

inline MetricsReport run(const SimConfig& cfg) {
  SimEngine engine(cfg);
  return engine.run();
}

/// Runs the same seed at each offered rate in ascending order; each report's
/// saturated flag marks delivered throughput below 95% of offered load.
inline std::vector<std::pair<double, MetricsReport>> saturation_sweep(
    SimConfig cfg, const std::vector<double>& rates) {
  std::vector<std::pair<double, MetricsReport>> out;
  for (double r : rates) {
    cfg.injection_rate = r;
    out.emplace_back(r, run(cfg));
  }
  return out;
}

}  // namespace noctsim
