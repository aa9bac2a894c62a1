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

// Label index sets and the joint-class density formula.
//
// A target class is named by a pair (I, J): members of every class in I and
// of no class in J. Given per-class functions f_k (class-conditional
// densities scaled by their priors), the joint-class function is
//
//   f_(I,J) = (min_{i in I} f_i - max_{j in J} f_j)^+      (J non-empty)
//   f_(I,J) = min_{i in I} f_i                              (J empty)
//
// provided the joint classes partition the data and mutually exclusive
// single-difference classes have disjoint supports. DiscreteLabelWorld is a
// finite world built so that both conditions hold; oracle_joint_mass sums
// the joint classes directly and serves as the reference for the formula.

#ifndef S2M_JOINT_CLASS_HPP_
#define S2M_JOINT_CLASS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace s2m {

/// Sorted, duplicate-free list of class indices.
using IndexSet = std::vector<std::size_t>;

class JointClassSpec {
 public:
  /// The minimal legal pair ({0}, {}) over a universe of one class.
  JointClassSpec() : intersection_{0}, universe_size_(1) {}

  /// Validates and normalizes (sorts, deduplicates) the two index sets.
  /// Throws InvalidSpec.
  static JointClassSpec make(IndexSet intersection, IndexSet difference,
                             std::size_t universe_size);

  const IndexSet& intersection() const { return intersection_; }
  const IndexSet& difference() const { return difference_; }
  std::size_t universe_size() const { return universe_size_; }

  /// Whether I and J together name every class, i.e. a joint class.
  bool saturated() const {
    return intersection_.size() + difference_.size() == universe_size_;
  }

  /// Whether a point whose positive labels are `labels` belongs to the class:
  /// I is a subset of labels and J is disjoint from labels.
  bool admits(const IndexSet& labels) const;

  friend bool operator==(const JointClassSpec&, const JointClassSpec&) = default;

 private:
  IndexSet intersection_;
  IndexSet difference_;
  std::size_t universe_size_;
};

JointClassSpec validate_spec(IndexSet intersection, IndexSet difference,
                             std::size_t universe_size);

/// (min over I - max over J)^+ of `values` (one entry per class). The max over
/// an empty J is 0, which makes the J-empty branch the same expression.
double joint_density_value(std::span<const double> values,
                           const JointClassSpec& spec);

/// All 2^n - 1 joint classes (I u J = N, I non-empty), ordered by the
/// bitmask of I. Requires 1 <= n <= 16.
std::vector<JointClassSpec> enumerate_joint_classes(std::size_t n);

/// Canonical text form: "+A+B-C". Members of I carry '+', members of J carry
/// '-' (U+2212 is accepted on input). Classes are written by name when `names`
/// is non-empty, otherwise by index.
std::string format_spec(const JointClassSpec& spec,
                        std::span<const std::string> names = {});

/// Parses the canonical text form. Tokens resolve against `names` first and
/// then as decimal indices.
JointClassSpec parse_spec(std::string_view text, std::size_t universe_size,
                          std::span<const std::string> names = {});

/// A finite world in which every point carries exactly one joint class.
class DiscreteLabelWorld {
 public:
  DiscreteLabelWorld(std::size_t universe_size, std::vector<IndexSet> labels,
                     std::vector<double> masses);

  std::size_t universe_size() const { return universe_size_; }
  std::size_t point_count() const { return labels_.size(); }
  const IndexSet& labels(std::size_t point) const;
  double mass(std::size_t point) const;

  /// f_k(point) for every k: the point's mass if k is one of its labels.
  std::vector<double> class_values(std::size_t point) const;

  /// Total mass of the points admitted by `spec` (the class prior of (I, J)).
  double class_mass(const JointClassSpec& spec) const;

 private:
  std::size_t universe_size_;
  std::vector<IndexSet> labels_;
  std::vector<double> masses_;
};

/// Brute-force f_(I,J)(point): sum over every subset S of N with I in S and
/// J outside S of the joint-class function f_(S, N\S) at the point.
double oracle_joint_mass(const DiscreteLabelWorld& world,
                         const JointClassSpec& spec, std::size_t point);

}  // namespace s2m

#endif  // S2M_JOINT_CLASS_HPP_
