// Command-line front end: run one simulation, sweep a parameter grid, or
// compare result CSVs. Flags mirror the config-file keys and override them.

#include <CLI11.hpp>

#include "noctsim/report.hpp"

namespace {

using noctsim::SimConfig;

struct KeyFlags {
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    for (const char* key :
         {"scheme", "width", "height", "vc_count", "packet_len", "vb",
          "shared_size", "injection_rate", "fault_rate", "seed",
          "warmup_cycles", "measure_cycles", "drain_limit_cycles", "traffic",
          "misroute_budget"}) {
      app->add_option_function<std::string>(
          std::string("--") + key,
          [this, key](const std::string& v) { values[key] = v; });
    }
  }

  std::vector<std::pair<std::string, std::string>> overrides() const {
    return {values.begin(), values.end()};
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// For sweep, the list-capable keys accept comma-separated values; a single
// value behaves exactly like the run subcommand.
noctsim::SweepSpec sweep_spec_from(KeyFlags& flags) {
  noctsim::SweepSpec spec;
  auto take = [&](const char* key) -> std::vector<std::string> {
    auto it = flags.values.find(key);
    if (it == flags.values.end() || it->second.find(',') == std::string::npos)
      return {};
    auto items = split_list(it->second);
    flags.values.erase(it);
    return items;
  };
  for (const auto& s : take("scheme")) {
    auto v = noctsim::parse_scheme(s);
    if (!v) throw noctsim::TypeError("scheme");
    spec.schemes.push_back(*v);
  }
  for (const auto& s : take("injection_rate"))
    spec.injection_rates.push_back(noctsim::parse_double(s, "injection_rate"));
  for (const auto& s : take("fault_rate"))
    spec.fault_rates.push_back(noctsim::parse_double(s, "fault_rate"));
  for (const auto& s : take("shared_size"))
    spec.shared_sizes.push_back(
        static_cast<int>(noctsim::parse_int(s, "shared_size")));
  for (const auto& s : take("vb"))
    spec.vbs.push_back(static_cast<int>(noctsim::parse_int(s, "vb")));
  for (const auto& s : take("seed"))
    spec.seeds.push_back(
        static_cast<std::uint64_t>(noctsim::parse_int(s, "seed")));
  return spec;
}

struct CsvOut {
  std::ofstream file;
  bool header = true;
  std::ostream* stream = &std::cout;

  explicit CsvOut(const std::string& path) {
    if (path.empty()) return;
    std::ifstream probe(path);
    header = !probe || probe.peek() == std::ifstream::traits_type::eof();
    file.open(path, std::ios::app);
    if (!file) throw noctsim::ConfigError("cannot open output file " + path);
    stream = &file;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mesh NoC simulator: shared input-buffer schemes under "
               "odd-even fault-tolerant routing"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  int jobs = 1;

  auto* run_cmd = app.add_subcommand("run", "run one simulation");
  KeyFlags run_flags;
  run_flags.attach(run_cmd);
  run_cmd->add_option("--config", config_path, "config file (key=value)");
  run_cmd->add_option("--out", out_path, "append the CSV row to this file");

  auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter grid");
  KeyFlags sweep_flags;
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--config", config_path, "config file (key=value)");
  sweep_cmd->add_option("--out", out_path, "append CSV rows to this file");
  sweep_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* cmp_cmd = app.add_subcommand("compare", "aggregate result CSVs");
  std::vector<std::string> csv_paths;
  noctsim::CompareOptions copt;
  cmp_cmd->add_option("csv", csv_paths, "input CSV files")->required();
  cmp_cmd->add_option("--metric", copt.metric, "metric column");
  cmp_cmd->add_option("--group-by", copt.group_by, "grouping column");
  cmp_cmd->add_option("--x", copt.x, "x-axis column");
  cmp_cmd->add_option("--out", out_path, "write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) {
      const SimConfig cfg = noctsim::parse_config(config_path, run_flags.overrides());
      CsvOut out(out_path);
      return noctsim::cmd_run(cfg, *out.stream, out.header);
    }
    if (sweep_cmd->parsed()) {
      const noctsim::SweepSpec spec = sweep_spec_from(sweep_flags);
      const SimConfig base = noctsim::parse_config(config_path, sweep_flags.overrides());
      CsvOut out(out_path);
      const int rows = noctsim::cmd_sweep(base, spec, *out.stream, jobs, out.header);
      return rows > 0 ? 0 : 1;
    }
    const std::string report = noctsim::cmd_compare(csv_paths, copt);
    if (out_path.empty()) {
      std::cout << report;
    } else {
      std::ofstream f(out_path);
      f << report;
    }
    return 0;
  } catch (const noctsim::UnknownKey& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const noctsim::TypeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const noctsim::MissingRequired& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
