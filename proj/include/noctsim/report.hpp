#pragma once

#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "noctsim/engine.hpp"

namespace noctsim {

struct UnknownKey : ConfigError {
  UnknownKey(const std::string& key, int line)
      : ConfigError("unknown key '" + key + "' (line " + std::to_string(line) +
                    ")") {}
};
struct TypeError : ConfigError {
  explicit TypeError(const std::string& key)
      : ConfigError("bad value for key '" + key + "'") {}
};
struct MissingRequired : ConfigError {
  explicit MissingRequired(const std::string& key)
      : ConfigError("missing required key '" + key + "'") {}
};
struct SchemaMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Number formatting: shortest round-trip forms, locale-independent.

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& key) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw TypeError(key);
  return v;
}

inline std::int64_t parse_int(std::string_view s, const std::string& key) {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw TypeError(key);
  return v;
}

// ---------------------------------------------------------------------------
// Configuration: key=value text, '#' comments, CLI flags override the file.

struct ConfigState {
  SimConfig cfg;
  bool scheme_set = false;
};

inline void apply_config_key(ConfigState& st, const std::string& key,
                             const std::string& value, int line) {
  auto int_field = [&](int& out, std::int64_t lo, std::int64_t hi) {
    const std::int64_t v = parse_int(value, key);
    if (v < lo || v > hi) throw TypeError(key);
    out = static_cast<int>(v);
  };
  if (key == "scheme") {
    auto s = parse_scheme(value);
    if (!s) throw TypeError(key);
    st.cfg.scheme = *s;
    st.scheme_set = true;
  } else if (key == "width") {
    int_field(st.cfg.width, 1, 1 << 12);
  } else if (key == "height") {
    int_field(st.cfg.height, 1, 1 << 12);
  } else if (key == "vc_count") {
    int_field(st.cfg.vc_count, 1, 64);
  } else if (key == "packet_len") {
    int_field(st.cfg.packet_len, 2, 1 << 16);
  } else if (key == "vb") {
    int_field(st.cfg.vb, 1, 1 << 16);
  } else if (key == "shared_size") {
    int_field(st.cfg.shared_size, 1, 1 << 16);
  } else if (key == "injection_rate") {
    st.cfg.injection_rate = parse_double(value, key);
  } else if (key == "fault_rate") {
    st.cfg.fault_rate = parse_double(value, key);
  } else if (key == "seed") {
    st.cfg.seed = static_cast<std::uint64_t>(parse_int(value, key));
  } else if (key == "warmup_cycles") {
    st.cfg.warmup_cycles = parse_int(value, key);
  } else if (key == "measure_cycles") {
    st.cfg.measure_cycles = parse_int(value, key);
  } else if (key == "drain_limit_cycles") {
    st.cfg.drain_limit_cycles = parse_int(value, key);
  } else if (key == "traffic") {
    st.cfg.traffic = value;
  } else if (key == "misroute_budget") {
    int_field(st.cfg.misroute_budget, 0, 1 << 20);
  } else {
    throw UnknownKey(key, line);
  }
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline void parse_config_stream(ConfigState& st, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key=value");
    apply_config_key(st, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                     lineno);
  }
}

/// Parses an optional config file plus flag overrides ((key, value) pairs,
/// applied after the file). scheme is the one key without a default.
inline SimConfig parse_config(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  ConfigState st;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    parse_config_stream(st, in);
  }
  for (const auto& [key, value] : overrides)
    apply_config_key(st, key, value, 0);
  if (!st.scheme_set) throw MissingRequired("scheme");
  st.cfg.validate();
  return st.cfg;
}

// ---------------------------------------------------------------------------
// Run records: one CSV row per run, fixed column order.

inline constexpr std::string_view kCsvHeader =
    "scheme,width,height,vc_count,packet_len,vb,shared_size,fault_rate,seed,"
    "injection_rate,avg_latency,throughput,buffer_usage_rate,dropped_packets,"
    "purged_flits,shift_ops_total,saturated";

struct RunRecord {
  Scheme scheme = Scheme::SAMQ;
  int width = 0, height = 0, vc_count = 0, packet_len = 0, vb = 0,
      shared_size = 0;
  double fault_rate = 0.0;
  std::uint64_t seed = 0;
  double injection_rate = 0.0;
  double avg_latency = 0.0;
  double throughput = 0.0;
  double buffer_usage_rate = 0.0;
  std::int64_t dropped_packets = 0;
  std::int64_t purged_flits = 0;
  std::uint64_t shift_ops_total = 0;
  bool saturated = false;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;

  static RunRecord from(const SimConfig& cfg, const MetricsReport& rep) {
    RunRecord r;
    r.scheme = cfg.scheme;
    r.width = cfg.width;
    r.height = cfg.height;
    r.vc_count = cfg.vc_count;
    r.packet_len = cfg.packet_len;
    r.vb = cfg.vb;
    r.shared_size = cfg.shared_size;
    r.fault_rate = cfg.fault_rate;
    r.seed = cfg.seed;
    r.injection_rate = cfg.injection_rate;
    r.avg_latency = rep.avg_latency;
    r.throughput = rep.throughput;
    r.buffer_usage_rate = rep.buffer_usage_rate;
    r.dropped_packets = rep.dropped_packets;
    r.purged_flits = rep.purged_flits;
    r.shift_ops_total = rep.shift_ops_total;
    r.saturated = rep.saturated;
    return r;
  }

  std::string to_row() const {
    std::string out;
    out += to_string(scheme);
    for (int v : {width, height, vc_count, packet_len, vb, shared_size}) {
      out += ',';
      out += std::to_string(v);
    }
    out += ',' + format_double(fault_rate);
    out += ',' + std::to_string(seed);
    out += ',' + format_double(injection_rate);
    out += ',' + format_double(avg_latency);
    out += ',' + format_double(throughput);
    out += ',' + format_double(buffer_usage_rate);
    out += ',' + std::to_string(dropped_packets);
    out += ',' + std::to_string(purged_flits);
    out += ',' + std::to_string(shift_ops_total);
    out += ',';
    out += saturated ? '1' : '0';
    return out;
  }

  static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    fields.push_back(cur);
    return fields;
  }

  static RunRecord parse(const std::string& line) {
    const auto f = split_csv(line);
    if (f.size() != 17) throw SchemaMismatch("expected 17 columns");
    RunRecord r;
    auto s = parse_scheme(f[0]);
    if (!s) throw SchemaMismatch("bad scheme field: " + f[0]);
    r.scheme = *s;
    r.width = static_cast<int>(parse_int(f[1], "width"));
    r.height = static_cast<int>(parse_int(f[2], "height"));
    r.vc_count = static_cast<int>(parse_int(f[3], "vc_count"));
    r.packet_len = static_cast<int>(parse_int(f[4], "packet_len"));
    r.vb = static_cast<int>(parse_int(f[5], "vb"));
    r.shared_size = static_cast<int>(parse_int(f[6], "shared_size"));
    r.fault_rate = parse_double(f[7], "fault_rate");
    r.seed = static_cast<std::uint64_t>(parse_int(f[8], "seed"));
    r.injection_rate = parse_double(f[9], "injection_rate");
    r.avg_latency = parse_double(f[10], "avg_latency");
    r.throughput = parse_double(f[11], "throughput");
    r.buffer_usage_rate = parse_double(f[12], "buffer_usage_rate");
    r.dropped_packets = parse_int(f[13], "dropped_packets");
    r.purged_flits = parse_int(f[14], "purged_flits");
    r.shift_ops_total = static_cast<std::uint64_t>(parse_int(f[15], "shift_ops_total"));
    if (f[16] != "0" && f[16] != "1") throw SchemaMismatch("bad saturated flag");
    r.saturated = f[16] == "1";
    return r;
  }

  std::string column_as_string(const std::string& col) const {
    if (col == "scheme") return to_string(scheme);
    if (col == "saturated") return saturated ? "1" : "0";
    if (col == "seed") return std::to_string(seed);
    return format_double(column_as_number(col));
  }

  double column_as_number(const std::string& col) const {
    if (col == "width") return width;
    if (col == "height") return height;
    if (col == "vc_count") return vc_count;
    if (col == "packet_len") return packet_len;
    if (col == "vb") return vb;
    if (col == "shared_size") return shared_size;
    if (col == "fault_rate") return fault_rate;
    if (col == "seed") return static_cast<double>(seed);
    if (col == "injection_rate") return injection_rate;
    if (col == "avg_latency") return avg_latency;
    if (col == "throughput") return throughput;
    if (col == "buffer_usage_rate") return buffer_usage_rate;
    if (col == "dropped_packets") return static_cast<double>(dropped_packets);
    if (col == "purged_flits") return static_cast<double>(purged_flits);
    if (col == "shift_ops_total") return static_cast<double>(shift_ops_total);
    if (col == "saturated") return saturated ? 1.0 : 0.0;
    throw SchemaMismatch("no numeric column named '" + col + "'");
  }
};

inline std::vector<RunRecord> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaMismatch("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw SchemaMismatch(path + ": header does not match the run-record schema");
  std::vector<RunRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(RunRecord::parse(line));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_run(const SimConfig& cfg, std::ostream& out,
                   bool write_header = true) {
  const MetricsReport rep = run(cfg);
  if (write_header) out << kCsvHeader << '\n';
  out << RunRecord::from(cfg, rep).to_row() << '\n';
  return 0;
}

/// Cartesian sweep lists; an empty list means "use the base config's value".
struct SweepSpec {
  std::vector<Scheme> schemes;
  std::vector<double> injection_rates;
  std::vector<double> fault_rates;
  std::vector<int> shared_sizes;
  std::vector<int> vbs;
  std::vector<std::uint64_t> seeds;

  std::vector<SimConfig> expand(const SimConfig& base) const {
    auto or_default = [](auto list, auto fallback) {
      if (list.empty()) list.push_back(fallback);
      return list;
    };
    const auto ss = or_default(schemes, base.scheme);
    const auto rs = or_default(injection_rates, base.injection_rate);
    const auto fs = or_default(fault_rates, base.fault_rate);
    const auto zs = or_default(shared_sizes, base.shared_size);
    const auto vs = or_default(vbs, base.vb);
    const auto es = or_default(seeds, base.seed);
    std::vector<SimConfig> out;
    for (Scheme s : ss)
      for (double r : rs)
        for (double f : fs)
          for (int z : zs)
            for (int v : vs)
              for (std::uint64_t e : es) {
                SimConfig c = base;
                c.scheme = s;
                c.injection_rate = r;
                c.fault_rate = f;
                c.shared_size = z;
                c.vb = v;
                c.seed = e;
                out.push_back(c);
              }
    return out;
  }
};

/// Runs every combination, optionally across worker threads; rows are
/// emitted in sweep order regardless of scheduling, failed runs are reported
/// on stderr and skipped. Returns the number of rows produced.
inline int cmd_sweep(const SimConfig& base, const SweepSpec& spec,
                     std::ostream& out, int jobs = 1,
                     bool write_header = true) {
  const std::vector<SimConfig> runs = spec.expand(base);
  std::vector<std::string> rows(runs.size());
  std::vector<std::string> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      try {
        rows[i] = RunRecord::from(runs[i], run(runs[i])).to_row();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (write_header) out << kCsvHeader << '\n';
  int produced = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "sweep: run " << i << " failed: " << errors[i] << '\n';
      continue;
    }
    out << rows[i] << '\n';
    ++produced;
  }
  return produced;
}

struct CompareOptions {
  std::string metric = "throughput";
  std::string group_by = "scheme";
  std::string x = "injection_rate";
};

/// Per-group series of seed-averaged metric values over the x column, a
/// summary table (peak and mean of the series), and pairwise peak ratios.
inline std::string cmd_compare(const std::vector<std::string>& paths,
                               const CompareOptions& opt) {
  std::vector<RunRecord> rows;
  for (const auto& p : paths) {
    auto part = load_csv(p);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (rows.empty()) throw SchemaMismatch("no rows to compare");

  std::map<std::string, std::map<double, std::pair<double, int>>> groups;
  for (const RunRecord& r : rows) {
    auto& cell = groups[r.column_as_string(opt.group_by)]
                       [r.column_as_number(opt.x)];
    cell.first += r.column_as_number(opt.metric);
    cell.second += 1;
  }

  std::map<std::string, std::pair<double, double>> summary;  // peak, mean
  for (const auto& [g, series] : groups) {
    double peak = 0.0, sum = 0.0;
    bool first = true;
    for (const auto& [x, cell] : series) {
      (void)x;
      const double mean = cell.first / cell.second;
      peak = first ? mean : std::max(peak, mean);
      first = false;
      sum += mean;
    }
    summary[g] = {peak, sum / static_cast<double>(series.size())};
  }

  char buf[160];
  std::string out;
  out += "# compare metric=" + opt.metric + " group-by=" + opt.group_by +
         " x=" + opt.x + "\n";
  out += "# group points peak mean\n";
  for (const auto& [g, s] : summary) {
    std::snprintf(buf, sizeof buf, "%s %zu %.6g %.6g\n", g.c_str(),
                  groups[g].size(), s.first, s.second);
    out += buf;
  }
  out += "# ratios (peak)\n";
  for (auto a = summary.begin(); a != summary.end(); ++a)
    for (auto b = std::next(a); b != summary.end(); ++b) {
      std::snprintf(buf, sizeof buf, "%s/%s %.6g\n", a->first.c_str(),
                    b->first.c_str(),
                    b->second.first == 0.0 ? 0.0
                                           : a->second.first / b->second.first);
      out += buf;
    }
  for (const auto& [g, series] : groups) {
    out += "# series " + g + "\n";
    for (const auto& [x, cell] : series) {
      std::snprintf(buf, sizeof buf, "%.6g %.6g\n", x,
                    cell.first / cell.second);
      out += buf;
    }
  }
  return out;
}

}  // namespace noctsim
