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

#include "s2m/joint_class.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cmath>
#include <limits>

#include "s2m/errors.hpp"

namespace s2m {
namespace {

void normalize(IndexSet& set) {
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
}

bool is_subset(const IndexSet& small, const IndexSet& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

bool disjoint(const IndexSet& a, const IndexSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return false;
    if (*i < *j) {
      ++i;
    } else {
      ++j;
    }
  }
  return true;
}

}  // namespace

JointClassSpec JointClassSpec::make(IndexSet intersection, IndexSet difference,
                                    std::size_t universe_size) {
  normalize(intersection);
  normalize(difference);
  if (intersection.empty()) {
    throw InvalidSpec(InvalidSpec::Reason::kEmptyIntersection,
                      "intersection index set must be non-empty");
  }
  if (!disjoint(intersection, difference)) {
    throw InvalidSpec(InvalidSpec::Reason::kOverlappingSets,
                      "intersection and difference index sets overlap");
  }
  const auto out_of_range = [&](const IndexSet& s) {
    return !s.empty() && s.back() >= universe_size;
  };
  if (out_of_range(intersection) || out_of_range(difference)) {
    throw InvalidSpec(InvalidSpec::Reason::kIndexOutOfRange,
                      "class index out of range for a universe of " +
                          std::to_string(universe_size) + " classes");
  }
  JointClassSpec spec;
  spec.intersection_ = std::move(intersection);
  spec.difference_ = std::move(difference);
  spec.universe_size_ = universe_size;
  return spec;
}

bool JointClassSpec::admits(const IndexSet& labels) const {
  return is_subset(intersection_, labels) && disjoint(difference_, labels);
}

JointClassSpec validate_spec(IndexSet intersection, IndexSet difference,
                             std::size_t universe_size) {
  return JointClassSpec::make(std::move(intersection), std::move(difference),
                              universe_size);
}

double joint_density_value(std::span<const double> values,
                           const JointClassSpec& spec) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i : spec.intersection()) lo = std::min(lo, values[i]);
  double hi = 0.0;
  for (std::size_t j : spec.difference()) hi = std::max(hi, values[j]);
  return std::max(lo - hi, 0.0);
}

std::vector<JointClassSpec> enumerate_joint_classes(std::size_t n) {
  if (n < 1 || n > 16) {
    throw InvalidSpec(InvalidSpec::Reason::kIndexOutOfRange,
                      "joint-class enumeration needs 1 <= n <= 16");
  }
  std::vector<JointClassSpec> out;
  out.reserve((std::size_t{1} << n) - 1);
  for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << n); ++mask) {
    IndexSet in;
    IndexSet out_set;
    for (std::size_t k = 0; k < n; ++k) {
      ((mask >> k) & 1U ? in : out_set).push_back(k);
    }
    out.push_back(JointClassSpec::make(std::move(in), std::move(out_set), n));
  }
  return out;
}

std::string format_spec(const JointClassSpec& spec,
                        std::span<const std::string> names) {
  std::string text;
  const auto append = [&](char sign, std::size_t k) {
    text.push_back(sign);
    text += k < names.size() ? names[k] : std::to_string(k);
  };
  for (std::size_t i : spec.intersection()) append('+', i);
  for (std::size_t j : spec.difference()) append('-', j);
  return text;
}

JointClassSpec parse_spec(std::string_view text, std::size_t universe_size,
                          std::span<const std::string> names) {
  static constexpr std::string_view kUnicodeMinus = "\xE2\x88\x92";
  IndexSet in;
  IndexSet out;
  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  };
  skip_space();
  if (pos == text.size()) {
    throw InvalidSpec(InvalidSpec::Reason::kMalformed, "empty spec text");
  }
  while (pos < text.size()) {
    bool positive;
    if (text[pos] == '+') {
      positive = true;
      ++pos;
    } else if (text[pos] == '-') {
      positive = false;
      ++pos;
    } else if (text.substr(pos, kUnicodeMinus.size()) == kUnicodeMinus) {
      positive = false;
      pos += kUnicodeMinus.size();
    } else {
      throw InvalidSpec(InvalidSpec::Reason::kMalformed,
                        "expected '+' or '-' at offset " + std::to_string(pos) +
                            " in \"" + std::string(text) + "\"");
    }
    std::size_t end = pos;
    while (end < text.size() && text[end] != '+' && text[end] != '-' &&
           text.substr(end, kUnicodeMinus.size()) != kUnicodeMinus &&
           text[end] != ' ') {
      ++end;
    }
    const std::string_view token = text.substr(pos, end - pos);
    if (token.empty()) {
      throw InvalidSpec(InvalidSpec::Reason::kMalformed,
                        "missing class name in \"" + std::string(text) + "\"");
    }
    std::size_t index = names.size();
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (names[k] == token) {
        index = k;
        break;
      }
    }
    if (index == names.size()) {
      std::size_t parsed = 0;
      const auto [ptr, ec] =
          std::from_chars(token.data(), token.data() + token.size(), parsed);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw InvalidSpec(InvalidSpec::Reason::kUnknownLabel,
                          "unknown class \"" + std::string(token) + "\"");
      }
      index = parsed;
    }
    (positive ? in : out).push_back(index);
    pos = end;
    skip_space();
  }
  return JointClassSpec::make(std::move(in), std::move(out), universe_size);
}

DiscreteLabelWorld::DiscreteLabelWorld(std::size_t universe_size,
                                       std::vector<IndexSet> labels,
                                       std::vector<double> masses)
    : universe_size_(universe_size),
      labels_(std::move(labels)),
      masses_(std::move(masses)) {
  if (labels_.size() != masses_.size()) {
    throw Error("label and mass lists differ in length");
  }
  double total = 0.0;
  for (std::size_t p = 0; p < labels_.size(); ++p) {
    normalize(labels_[p]);
    if (!labels_[p].empty() && labels_[p].back() >= universe_size_) {
      throw InvalidSpec(InvalidSpec::Reason::kIndexOutOfRange,
                        "label index out of range");
    }
    if (!(masses_[p] >= 0.0) || !std::isfinite(masses_[p])) {
      throw Error("point masses must be finite and non-negative");
    }
    total += masses_[p];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error("point masses must sum to a positive finite total");
  }
}

const IndexSet& DiscreteLabelWorld::labels(std::size_t point) const {
  if (point >= labels_.size()) throw Error("unknown point");
  return labels_[point];
}

double DiscreteLabelWorld::mass(std::size_t point) const {
  if (point >= masses_.size()) throw Error("unknown point");
  return masses_[point];
}

std::vector<double> DiscreteLabelWorld::class_values(std::size_t point) const {
  std::vector<double> values(universe_size_, 0.0);
  for (std::size_t k : labels(point)) values[k] = masses_[point];
  return values;
}

double DiscreteLabelWorld::class_mass(const JointClassSpec& spec) const {
  double total = 0.0;
  for (std::size_t p = 0; p < labels_.size(); ++p) {
    if (spec.admits(labels_[p])) total += masses_[p];
  }
  return total;
}

double oracle_joint_mass(const DiscreteLabelWorld& world,
                         const JointClassSpec& spec, std::size_t point) {
  const std::size_t n = world.universe_size();
  const IndexSet& own = world.labels(point);
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    IndexSet subset;
    for (std::size_t k = 0; k < n; ++k) {
      if ((mask >> k) & 1U) subset.push_back(k);
    }
    if (!spec.admits(subset)) continue;
    // f_(S, N\S) at the point: its mass when S is exactly its label set.
    if (subset == own) total += world.mass(point);
  }
  return total;
}

}  // namespace s2m
