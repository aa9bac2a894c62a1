// Copyright 2026 The s2m Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings. Structured values (configs, worlds, reports) cross the
// boundary as JSON text; the Python package wraps them in dicts.

#include <filesystem>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "s2m/errors.hpp"
#include "s2m/experiment.hpp"
#include "s2m/joint_class.hpp"
#include "s2m/worlds.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

s2m::ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  s2m::ExperimentConfig c = s2m::config_from_json(json::parse(text));
  c.base_dir = base_dir;
  return c;
}

std::pair<s2m::IndexSet, s2m::IndexSet> split(const s2m::JointClassSpec& spec) {
  return {spec.intersection(), spec.difference()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint-class sampling core";
  m.attr("artifact_version") = s2m::kArtifactVersion;

  static py::exception<s2m::Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<s2m::ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<s2m::InvalidSpec> invalid_spec(m, "InvalidSpec", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const s2m::ConfigError& e) {
      config_error(e.what());
    } catch (const s2m::InvalidSpec& e) {
      invalid_spec(e.what());
    } catch (const s2m::Error& e) {
      error(e.what());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("joint_density_value",
        [](const std::vector<double>& values, const s2m::IndexSet& intersection,
           const s2m::IndexSet& difference) {
          return s2m::joint_density_value(
              values, s2m::validate_spec(intersection, difference, values.size()));
        },
        py::arg("values"), py::arg("intersection"), py::arg("difference"));

  m.def("parse_spec",
        [](const std::string& text, std::size_t n, const std::vector<std::string>& names) {
          return split(s2m::parse_spec(text, n, names));
        },
        py::arg("text"), py::arg("universe_size"), py::arg("names") = std::vector<std::string>{});

  m.def("format_spec",
        [](const s2m::IndexSet& intersection, const s2m::IndexSet& difference, std::size_t n,
           const std::vector<std::string>& names) {
          return s2m::format_spec(s2m::validate_spec(intersection, difference, n), names);
        },
        py::arg("intersection"), py::arg("difference"), py::arg("universe_size"),
        py::arg("names") = std::vector<std::string>{});

  m.def("enumerate_joint_classes", [](std::size_t n) {
    std::vector<std::pair<s2m::IndexSet, s2m::IndexSet>> out;
    for (const auto& spec : s2m::enumerate_joint_classes(n)) out.push_back(split(spec));
    return out;
  });

  m.def("builtin_world",
        [](const std::string& name, const std::string& params) {
          return s2m::world_to_json(s2m::builtin_world(name, json::parse(params))).dump();
        },
        py::arg("name"), py::arg("params") = "{}");

  m.def("normalize_config",
        [](const std::string& text) { return s2m::config_to_json(parse_config(text, "")).dump(); });

  m.def("validate_config",
        [](const std::string& text, const std::string& base_dir) {
          s2m::validate_config(parse_config(text, base_dir));
        },
        py::arg("config"), py::arg("base_dir") = ".");

  m.def("config_hash",
        [](const std::string& text) { return s2m::config_hash(parse_config(text, "")); });

  m.def("run",
        [](const std::string& text, const std::string& base_dir) {
          const auto config = parse_config(text, base_dir);
          s2m::RunResult result;
          {
            py::gil_scoped_release release;
            result = s2m::run_experiment(config);
          }
          py::list samples;
          for (const auto& run : result.runs) {
            py::dict d;
            d["spec"] = run.spec;
            d["points"] = Eigen::MatrixXd(run.samples.points.transpose());
            d["log_r"] = run.samples.log_r;
            d["chain"] = run.samples.chain_ids;
            samples.append(d);
          }
          return py::make_tuple(s2m::results_to_json(result).dump(), samples);
        },
        py::arg("config"), py::arg("base_dir") = ".");

  m.def("run_and_write",
        [](const std::string& text, const std::string& base_dir) {
          const auto config = parse_config(text, base_dir);
          py::gil_scoped_release release;
          return s2m::manifest_to_json(s2m::run_and_write(config)).dump();
        },
        py::arg("config"), py::arg("base_dir") = ".");

  m.def("sweep",
        [](const std::string& text, const std::string& base_dir) {
          const auto config = parse_config(text, base_dir);
          py::gil_scoped_release release;
          return s2m::sweep_csv(s2m::run_sweep(config));
        },
        py::arg("config"), py::arg("base_dir") = ".");

  m.def("render_report", [](const std::string& report) {
    return s2m::render_report_file(json::parse(report));
  });
}
