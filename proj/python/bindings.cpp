// JSON text crosses the boundary; the Python package converts to and from dicts.
#include <pybind11/pybind11.h>

#include <sstream>
#include <string>

#include "starmec/bcd.hpp"
#include "starmec/experiments.hpp"
#include "starmec/io.hpp"

namespace py = pybind11;
using namespace starmec;

namespace {

SystemConfig config_with_protocol(const std::string& config_json, const std::string& protocol) {
  SystemConfig cfg = io::config_from_json(config_json);
  if (!protocol.empty()) cfg.protocol = parse_protocol(protocol);
  cfg.validate();
  return cfg;
}

std::string optimize_json(const std::string& config_json, std::uint64_t seed,
                          const std::string& protocol) {
  const SystemConfig cfg = config_with_protocol(config_json, protocol);
  const ChannelSet cs = sample_channels(cfg, seed);
  py::gil_scoped_release release;
  return io::report_to_json(optimize(cs, cfg, seed));
}

std::string baseline_json(const std::string& name, const std::string& config_json,
                          std::uint64_t seed) {
  const Baseline kind = parse_baseline(name);
  const SystemConfig cfg = config_with_protocol(config_json, "");
  const ChannelSet cs = sample_channels(cfg, seed);
  py::gil_scoped_release release;
  SolveReport rep = run_baseline(kind, cs, cfg);
  rep.seed = seed;
  return io::report_to_json(rep);
}

std::string sweep_csv(const std::string& spec_json) {
  const SweepSpec spec = io::sweep_spec_from_json(spec_json);
  std::vector<ResultRow> rows;
  {
    py::gil_scoped_release release;
    rows = run_sweep(spec);
  }
  std::ostringstream os;
  write_results_csv(os, rows, spec.base_config.num_users());
  return os.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "STAR-RIS assisted MEC rate maximization";
  m.attr("schema_version") = io::kSchemaVersion;
  m.def(
      "default_config_json",
      [](int n_elements, int n_antennas, int t_users, int r_users) {
        return io::config_to_json(make_default_config(n_elements, n_antennas, t_users, r_users));
      },
      py::arg("n_elements") = 30, py::arg("n_antennas") = 10, py::arg("t_users") = 4,
      py::arg("r_users") = 4);
  m.def(
      "channels_json",
      [](const std::string& config_json, std::uint64_t seed) {
        const SystemConfig cfg = config_with_protocol(config_json, "");
        return io::channels_to_json(sample_channels(cfg, seed), seed);
      },
      py::arg("config_json"), py::arg("seed"));
  m.def("optimize_json", &optimize_json, py::arg("config_json"), py::arg("seed"),
        py::arg("protocol") = "");
  m.def("baseline_json", &baseline_json, py::arg("name"), py::arg("config_json"),
        py::arg("seed"));
  m.def("sweep_csv", &sweep_csv, py::arg("spec_json"));
}
