#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "lbap/config.hpp"
#include "lbap/errors.hpp"
#include "lbap/evalharness.hpp"
#include "lbap/grounding.hpp"
#include "lbap/posterior.hpp"
#include "lbap/scenarios.hpp"
#include "lbap/synthetic.hpp"

namespace py = pybind11;
using namespace lbap;

namespace {

MethodMode mode_arg(const std::string& name) {
  const auto m = method_mode_from_string(name);
  if (!m) throw UsageError("unknown mode '" + name + "'");
  return *m;
}

Box box_arg(const std::vector<double>& v) {
  if (v.size() != 4) throw UsageError("a box is [x_min, y_min, x_max, y_max]");
  return Box{v[0], v[1], v[2], v[3]};
}

py::dict report_dict(const SweepReport& r) {
  py::list rows;
  for (const auto& row : r.rows) {
    py::dict d;
    d["threshold"] = row.threshold;
    d["success_rate"] = row.success_rate;
    d["help_rate"] = row.help_rate;
    d["mean_set_size"] = row.mean_set_size;
    rows.append(d);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, r);
  py::dict out;
  out["mode"] = std::string(to_string(r.mode));
  out["rows"] = rows;
  out["auc"] = r.auc_success_vs_help;
  out["n"] = r.n_scenarios;
  out["failed"] = r.n_failed;
  out["csv"] = csv.str();
  return out;
}

std::vector<double> grid_or_default(const std::optional<std::vector<double>>& t) {
  return t && !t->empty() ? *t : default_threshold_grid();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LBAP core: posterior refinement, grounding, sweeps and calibration";
  py::register_exception<Error>(m, "LbapError");

  m.def("compute_posterior",
        [](const std::vector<double>& prior, const std::vector<double>& scene, const std::vector<double>& world,
           const std::string& mode) { return compute_posterior(prior, scene, world, mode_arg(mode)); },
        py::arg("prior"), py::arg("scene_lik"), py::arg("world_lik"), py::arg("mode") = "full");

  m.def("prediction_set",
        [](const std::vector<double>& posterior, const std::vector<std::string>& labels, double threshold) {
          const auto s = build_prediction_set(posterior, labels, threshold);
          return py::make_tuple(s.members, s.fallback);
        },
        py::arg("posterior"), py::arg("labels"), py::arg("threshold"),
        "Returns (members, fallback).");

  m.def("iou", [](const std::vector<double>& a, const std::vector<double>& b) { return iou(box_arg(a), box_arg(b)); });

  m.def("ground_textual",
        [](const std::string& action, const std::vector<std::string>& scene_objects, const std::string& environment,
           double epsilon) {
          const auto env = environment_by_name(environment);
          SceneContext scene;
          for (const auto& name : scene_objects) scene.objects.push_back(env.object_from_name(name));
          const CandidateAction c{"A", action, env.mentions(action)};
          return ground_textual(c, scene, GroundingConfig{epsilon, GroundingMode::Textual, 0.5});
        },
        py::arg("action"), py::arg("scene_objects"), py::arg("environment") = "tabletop", py::arg("epsilon") = 1e-3);

  m.def("generate_tabletop",
        [](std::size_t n, std::uint64_t seed) {
          std::vector<std::string> lines;
          for (const auto& s : generate_tabletop(n, seed, {})) lines.push_back(scenario_to_json_line(s));
          return lines;
        },
        py::arg("n"), py::arg("seed"), "Scenarios as JSON lines.");

  m.def("default_threshold_grid", &default_threshold_grid);
  m.def("min_calibration_size", &min_calibration_size, py::arg("alpha"));

  m.def("calibrate_from_scores",
        [](std::vector<double> scores, double alpha) {
          const auto c = calibrate_from_scores(std::move(scores), alpha);
          py::dict d;
          d["threshold"] = c.threshold;
          d["qhat"] = c.qhat;
          d["rank"] = c.rank;
          d["n"] = c.n;
          d["clipped"] = c.clipped;
          return d;
        },
        py::arg("scores"), py::arg("alpha"));

  m.def("sweep_synthetic",
        [](std::size_t n, std::uint64_t scenario_seed, const std::string& mode, double hallucination_rate,
           std::uint64_t backend_seed, std::size_t workers, std::optional<std::vector<double>> thresholds) {
          const auto scenarios = generate_tabletop(n, scenario_seed, {});
          SyntheticProfile p;
          p.seed = backend_seed;
          p.hallucination_rate = hallucination_rate;
          SyntheticBackend backend(p, tabletop_environment(), scenarios);
          const auto grid = grid_or_default(thresholds);
          const auto pipeline = Pipeline::for_environment("tabletop");
          py::gil_scoped_release release;
          auto report = sweep(scenarios, mode_arg(mode), grid, backend, pipeline, {workers, 0.1});
          py::gil_scoped_acquire acquire;
          return report_dict(report);
        },
        py::arg("n"), py::arg("scenario_seed"), py::arg("mode") = "full", py::arg("hallucination_rate") = 0.3,
        py::arg("backend_seed") = 7, py::arg("workers") = 1, py::arg("thresholds") = py::none());

  m.def("sweep_config",
        [](const std::filesystem::path& config, std::optional<std::filesystem::path> scenarios,
           std::optional<std::string> mode, std::optional<std::size_t> workers) {
          auto cfg = load_run_config(config);
          if (scenarios) cfg.scenarios = *scenarios;
          if (mode) cfg.mode = mode_arg(*mode);
          if (workers) cfg.workers = *workers;
          cfg.validate();
          const auto pipeline = build_pipeline(cfg);
          if (cfg.scenarios.empty()) throw UsageError("no scenarios configured");
          const auto loaded = load_scenarios(cfg.scenarios, pipeline.env);
          auto backend = build_backend(cfg, loaded);
          const auto grid = cfg.threshold_grid();
          return report_dict(sweep(loaded, cfg.mode, grid, *backend, pipeline, {cfg.workers, cfg.max_error_fraction}));
        },
        py::arg("config"), py::arg("scenarios") = py::none(), py::arg("mode") = py::none(),
        py::arg("workers") = py::none());
}
