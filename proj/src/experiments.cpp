#include "starmec/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace starmec {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kEs:
      return "es";
    case Scheme::kMs:
      return "ms";
    case Scheme::kConventionalRis:
      return "conventional";
    case Scheme::kZeroForcing:
      return "zf";
    case Scheme::kEqualEnergy:
      return "equal-energy";
    case Scheme::kEqualTime:
      return "equal-time";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  const std::string n = lower(name);
  if (n == "es") return Scheme::kEs;
  if (n == "ms") return Scheme::kMs;
  switch (parse_baseline(n)) {
    case Baseline::kConventionalRis:
      return Scheme::kConventionalRis;
    case Baseline::kZeroForcing:
      return Scheme::kZeroForcing;
    case Baseline::kEqualEnergy:
      return Scheme::kEqualEnergy;
    case Baseline::kEqualTime:
      return Scheme::kEqualTime;
  }
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

std::string_view to_string(SweepVariable v) {
  return v == SweepVariable::kElements ? "elements" : "antennas";
}

SweepVariable parse_sweep_variable(std::string_view name) {
  const std::string n = lower(name);
  if (n == "elements" || n == "m") return SweepVariable::kElements;
  if (n == "antennas" || n == "n") return SweepVariable::kAntennas;
  throw std::invalid_argument("unknown sweep variable '" + std::string(name) +
                              "' (expected elements|antennas)");
}

void SweepSpec::validate() const {
  if (values.empty()) throw std::invalid_argument("SweepSpec: values is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] <= 0) throw std::invalid_argument("SweepSpec: values must be positive");
    if (i > 0 && values[i] <= values[i - 1]) {
      throw std::invalid_argument("SweepSpec: values must be strictly increasing");
    }
  }
  if (realizations < 1) throw std::invalid_argument("SweepSpec: realizations must be >= 1");
  if (schemes.empty()) throw std::invalid_argument("SweepSpec: schemes is empty");
  if (threads < 0) throw std::invalid_argument("SweepSpec: threads must be >= 0");
  for (int v : values) config_for(v).validate();
}

SystemConfig SweepSpec::config_for(int value) const {
  SystemConfig cfg = base_config;
  if (variable == SweepVariable::kElements) {
    cfg.n_elements = value;
    if (auto_rank_tol) cfg.rank_tol = default_rank_tol(value);
  } else {
    cfg.n_antennas = value;
  }
  return cfg;
}

std::uint64_t child_seed(std::uint64_t master_seed, int /*value*/, int realization) {
  return splitmix64(splitmix64(master_seed) ^ static_cast<std::uint64_t>(realization));
}

SolveReport run_scheme(Scheme s, const ChannelSet& cs, const SystemConfig& cfg,
                       std::uint64_t seed) {
  SystemConfig c = cfg;
  switch (s) {
    case Scheme::kEs:
      c.protocol = Protocol::kEnergySplitting;
      return optimize(cs, c, seed);
    case Scheme::kMs:
      c.protocol = Protocol::kModeSwitching;
      return optimize(cs, c, seed);
    case Scheme::kConventionalRis:
      return run_baseline(Baseline::kConventionalRis, cs, c);
    case Scheme::kZeroForcing:
      return run_baseline(Baseline::kZeroForcing, cs, c);
    case Scheme::kEqualEnergy:
      return run_baseline(Baseline::kEqualEnergy, cs, c);
    case Scheme::kEqualTime:
      return run_baseline(Baseline::kEqualTime, cs, c);
  }
  throw std::invalid_argument("run_scheme: unknown scheme");
}

std::vector<ResultRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  struct Task {
    int value;
    int realization;
  };
  std::vector<Task> tasks;
  for (int v : spec.values) {
    for (int r = 0; r < spec.realizations; ++r) tasks.push_back({v, r});
  }
  const std::size_t n_schemes = spec.schemes.size();
  std::vector<ResultRow> rows(tasks.size() * n_schemes);

  auto work = [&](std::size_t t) {
    const Task& task = tasks[t];
    const SystemConfig cfg = spec.config_for(task.value);
    const std::uint64_t seed = child_seed(spec.master_seed, task.value, task.realization);
    ChannelSet cs;
    std::string channel_error;
    try {
      cs = sample_channels(cfg, seed);
    } catch (const std::exception& e) {
      channel_error = e.what();
    }
    for (std::size_t i = 0; i < n_schemes; ++i) {
      ResultRow& row = rows[t * n_schemes + i];
      row.scheme = spec.schemes[i];
      row.value = task.value;
      row.realization = task.realization;
      row.seed = seed;
      if (!channel_error.empty()) {
        row.ok = false;
        row.error = "channels: " + channel_error;
        continue;
      }
      try {
        const SolveReport rep = run_scheme(row.scheme, cs, cfg, seed);
        row.objective = rep.objective;
        row.offload_bps = rep.per_user_offload_rate;
        row.local_bps = rep.per_user_local_rate;
        row.iterations = rep.iterations;
        row.wall_time_s = rep.wall_time_s;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };

  int threads = spec.threads > 0 ? spec.threads
                                 : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(tasks.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) work(t);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("summarize: empty table");
  std::map<std::pair<int, int>, std::vector<double>> groups;  // (value, scheme) -> objectives
  std::map<std::pair<int, int>, int> failures;
  std::vector<std::pair<int, int>> order;
  for (const auto& r : rows) {
    const std::pair<int, int> key{r.value, static_cast<int>(r.scheme)};
    if (!groups.contains(key) && !failures.contains(key)) order.push_back(key);
    if (r.ok) {
      groups[key].push_back(r.objective);
    } else {
      ++failures[key];
    }
  }
  std::sort(order.begin(), order.end());
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    SummaryRow s;
    s.value = key.first;
    s.scheme = static_cast<Scheme>(key.second);
    s.failures = failures.contains(key) ? failures[key] : 0;
    const auto& xs = groups[key];
    s.count = static_cast<int>(xs.size());
    if (s.count > 0) {
      double sum = 0.0;
      for (double x : xs) sum += x;
      s.mean = sum / s.count;
      const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
      if (s.count > 1 && *lo != *hi) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / (s.count - 1));
      }
      s.half_width = 1.96 * s.sd / std::sqrt(static_cast<double>(s.count));
    }
    out.push_back(s);
  }
  return out;
}

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, int num_users) {
  os << kCsvSchema << '\n';
  os << "scheme,value,realization,seed,status,objective,offload_total,local_total,iterations";
  for (int k = 0; k < num_users; ++k) os << ",offload_" << k;
  for (int k = 0; k < num_users; ++k) os << ",local_" << k;
  os << '\n';
  for (const auto& r : rows) {
    double off = 0.0;
    double loc = 0.0;
    for (double x : r.offload_bps) off += x;
    for (double x : r.local_bps) loc += x;
    os << to_string(r.scheme) << ',' << r.value << ',' << r.realization << ',' << r.seed << ','
       << (r.ok ? "ok" : "error") << ',' << format_real(r.objective) << ',' << format_real(off)
       << ',' << format_real(loc) << ',' << r.iterations;
    for (int k = 0; k < num_users; ++k) {
      os << ',' << (static_cast<std::size_t>(k) < r.offload_bps.size() ? format_real(r.offload_bps[k]) : "");
    }
    for (int k = 0; k < num_users; ++k) {
      os << ',' << (static_cast<std::size_t>(k) < r.local_bps.size() ? format_real(r.local_bps[k]) : "");
    }
    os << '\n';
  }
}

void write_timing_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "scheme,value,realization,wall_time_s,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << to_string(r.scheme) << ',' << r.value << ',' << r.realization << ','
       << format_real(r.wall_time_s) << ',' << err << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << kCsvSchema << '\n';
  os << "scheme,value,count,failures,mean,sd,ci95_half_width\n";
  for (const auto& s : rows) {
    os << to_string(s.scheme) << ',' << s.value << ',' << s.count << ',' << s.failures << ','
       << format_real(s.mean) << ',' << format_real(s.sd) << ',' << format_real(s.half_width)
       << '\n';
  }
}

}  // namespace starmec
