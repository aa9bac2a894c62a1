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

#include "s2m/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "s2m/errors.hpp"
#include "s2m/numeric.hpp"

namespace s2m {

ModeWorld::ModeWorld(std::vector<Mode> modes, double sigma)
    : modes_(std::move(modes)), sigma_(sigma) {
  if (modes_.empty()) throw Error("mode world needs at least one mode");
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw Error("mode sigma must be positive");
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (modes_[i].center.size() != modes_.front().center.size()) {
      throw DimensionMismatch("mode centers differ in dimension");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (modes_[i].center == modes_[j].center) throw Error("mode centers must be distinct");
    }
    std::sort(modes_[i].labels.begin(), modes_[i].labels.end());
  }
}

std::size_t assign_to_mode(const Eigen::Ref<const Eigen::VectorXd>& x, const ModeWorld& world) {
  if (static_cast<std::size_t>(x.size()) != world.dim()) {
    throw DimensionMismatch("sample dimension does not match the mode world");
  }
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < world.size(); ++m) {
    const double dist = (x - world.modes()[m].center).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = m;
    }
  }
  return best;
}

std::vector<std::size_t> assign_to_modes(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                         const ModeWorld& world) {
  std::vector<std::size_t> out(static_cast<std::size_t>(points.cols()));
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    out[static_cast<std::size_t>(j)] = assign_to_mode(points.col(j), world);
  }
  return out;
}

double accuracy(const Eigen::Ref<const Eigen::MatrixXd>& points, const ModeWorld& world,
                const JointClassSpec& spec) {
  if (points.cols() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t m : assign_to_modes(points, world)) {
    if (spec.admits(world.modes()[m].labels)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(points.cols());
}

double high_quality_ratio(const Eigen::Ref<const Eigen::MatrixXd>& points,
                          const ModeWorld& world) {
  if (points.cols() == 0) return 0.0;
  const double radius = 4.0 * world.sigma();
  std::size_t good = 0;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const auto m = assign_to_mode(points.col(j), world);
    if ((points.col(j) - world.modes()[m].center).norm() <= radius) ++good;
  }
  return static_cast<double>(good) / static_cast<double>(points.cols());
}

double mode_std(const Eigen::Ref<const Eigen::MatrixXd>& points, const ModeWorld& world) {
  if (points.cols() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const auto m = assign_to_mode(points.col(j), world);
    sum += (points.col(j) - world.modes()[m].center).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(points.cols() * points.rows()));
}

std::vector<std::size_t> mode_counts(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                     const ModeWorld& world) {
  std::vector<std::size_t> counts(world.size(), 0);
  for (std::size_t m : assign_to_modes(points, world)) ++counts[m];
  return counts;
}

void Binning::validate() const {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ConfigError("binning", "needs finite lo < hi");
  }
  if (bins < 1) throw ConfigError("binning.bins", "must be at least 1");
  if (subdivisions < 8) throw ConfigError("binning.subdivisions", "must be at least 8");
}

std::vector<double> histogram(std::span<const double> samples, const Binning& binning) {
  binning.validate();
  std::vector<double> freq(binning.bins + 1, 0.0);
  if (samples.empty()) return freq;
  const double scale = static_cast<double>(binning.bins) / (binning.hi - binning.lo);
  for (double x : samples) {
    if (!(x >= binning.lo && x < binning.hi)) {
      freq[binning.bins] += 1.0;
      continue;
    }
    const auto b = std::min(static_cast<std::size_t>((x - binning.lo) * scale), binning.bins - 1);
    freq[b] += 1.0;
  }
  for (double& f : freq) f /= static_cast<double>(samples.size());
  return freq;
}

std::vector<double> exact_bin_masses(const std::function<double(double)>& density,
                                     const Binning& binning) {
  binning.validate();
  std::vector<double> mass(binning.bins + 1, 0.0);
  const double w = binning.width();
  const double h = w / static_cast<double>(binning.subdivisions);
  double total = 0.0;
  for (std::size_t b = 0; b < binning.bins; ++b) {
    const double lo = binning.lo + static_cast<double>(b) * w;
    double acc = 0.0;
    for (std::size_t s = 0; s < binning.subdivisions; ++s) {
      acc += density(lo + (static_cast<double>(s) + 0.5) * h);
    }
    mass[b] = acc * h;
    total += mass[b];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error("density has no mass on the binned domain");
  }
  for (double& m : mass) m /= total;
  return mass;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionMismatch("distributions differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return 0.5 * sum;
}

double tv_histogram(std::span<const double> samples,
                    const std::function<double(double)>& density, const Binning& binning) {
  return tv_distance(histogram(samples, binning), exact_bin_masses(density, binning));
}

std::vector<double> convergence_curve(const std::vector<std::vector<double>>& snapshots,
                                      const std::function<double(double)>& density,
                                      const Binning& binning) {
  const auto exact = exact_bin_masses(density, binning);
  std::vector<double> curve;
  curve.reserve(snapshots.size());
  for (const auto& snap : snapshots) curve.push_back(tv_distance(histogram(snap, binning), exact));
  return curve;
}

EvalReport evaluate_samples(const Eigen::Ref<const Eigen::MatrixXd>& points,
                            const ModeWorld& world, const JointClassSpec& spec,
                            std::span<const std::string> class_names) {
  EvalReport r;
  r.spec = format_spec(spec, class_names);
  r.samples = static_cast<std::size_t>(points.cols());
  r.accuracy = accuracy(points, world, spec);
  r.high_quality = high_quality_ratio(points, world);
  r.mode_std = mode_std(points, world);
  r.mode_counts = mode_counts(points, world);
  return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json doc{{"spec", r.spec},
                     {"source", r.source},
                     {"samples", r.samples},
                     {"accuracy", r.accuracy},
                     {"high_quality", r.high_quality},
                     {"mode_std", r.mode_std},
                     {"mode_counts", r.mode_counts},
                     {"acceptance_curve", r.acceptance_curve},
                     {"acceptance_rate", r.acceptance_rate},
                     {"accuracy_curve", r.accuracy_curve},
                     {"tv_curve", r.tv_curve}};
  doc["tv_distance"] = r.tv_distance ? nlohmann::json(*r.tv_distance) : nlohmann::json(nullptr);
  return doc;
}

EvalReport report_from_json(const nlohmann::json& doc) {
  EvalReport r;
  r.spec = doc.at("spec").get<std::string>();
  r.samples = doc.at("samples").get<std::size_t>();
  r.accuracy = doc.at("accuracy").get<double>();
  r.high_quality = doc.at("high_quality").get<double>();
  r.mode_std = doc.at("mode_std").get<double>();
  r.mode_counts = doc.value("mode_counts", std::vector<std::size_t>{});
  r.source = doc.value("source", std::string("s2m"));
  r.acceptance_curve = doc.value("acceptance_curve", std::vector<double>{});
  r.acceptance_rate = doc.value("acceptance_rate", 0.0);
  r.accuracy_curve = doc.value("accuracy_curve", std::vector<double>{});
  r.tv_curve = doc.value("tv_curve", std::vector<double>{});
  if (doc.contains("tv_distance") && !doc["tv_distance"].is_null()) {
    r.tv_distance = doc["tv_distance"].get<double>();
  }
  return r;
}

std::string render_table(std::span<const EvalReport> reports) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %-6s %8s %10s %13s %9s %8s\n", "spec", "source",
                "samples", "accuracy", "high-quality", "std-dev", "tv");
  out += line;
  for (const auto& r : reports) {
    char tv[16] = "-";
    if (r.tv_distance) std::snprintf(tv, sizeof tv, "%.4f", *r.tv_distance);
    std::snprintf(line, sizeof line, "%-16s %-6s %8zu %9.2f%% %12.2f%% %9.4f %8s\n",
                  r.spec.c_str(), r.source.c_str(), r.samples, 100.0 * r.accuracy,
                  100.0 * r.high_quality, r.mode_std, tv);
    out += line;
  }
  return out;
}

}  // namespace s2m
