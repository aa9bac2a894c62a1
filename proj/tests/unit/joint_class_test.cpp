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

#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "s2m/errors.hpp"
#include "s2m/random.hpp"

namespace s2m {
namespace {

InvalidSpec::Reason reason_of(IndexSet i, IndexSet j, std::size_t n) {
  try {
    validate_spec(std::move(i), std::move(j), n);
  } catch (const InvalidSpec& e) {
    return e.reason();
  }
  ADD_FAILURE() << "expected InvalidSpec";
  return InvalidSpec::Reason::kMalformed;
}

TEST(ValidateSpec, AcceptsMinimalPair) {
  const auto spec = validate_spec({0}, {}, 2);
  EXPECT_EQ(spec.intersection(), IndexSet{0});
  EXPECT_TRUE(spec.difference().empty());
  EXPECT_FALSE(spec.saturated());
}

TEST(ValidateSpec, RejectsEmptyIntersection) {
  EXPECT_EQ(reason_of({}, {1}, 2), InvalidSpec::Reason::kEmptyIntersection);
}

TEST(ValidateSpec, RejectsOverlap) {
  EXPECT_EQ(reason_of({0, 1}, {1}, 3), InvalidSpec::Reason::kOverlappingSets);
}

TEST(ValidateSpec, RejectsOutOfRange) {
  EXPECT_EQ(reason_of({0}, {2}, 2), InvalidSpec::Reason::kIndexOutOfRange);
  EXPECT_EQ(reason_of({5}, {}, 2), InvalidSpec::Reason::kIndexOutOfRange);
}

TEST(ValidateSpec, NormalizesOrderAndDuplicates) {
  const auto a = validate_spec({2, 0, 2}, {1}, 3);
  const auto b = validate_spec({0, 2}, {1, 1}, 3);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.saturated());
}

TEST(JointDensityValue, Examples) {
  const std::vector<double> f1{0.5, 0.2};
  EXPECT_DOUBLE_EQ(joint_density_value(f1, validate_spec({0}, {1}, 2)), 0.3);
  const std::vector<double> f2{0.2, 0.5};
  EXPECT_EQ(joint_density_value(f2, validate_spec({0}, {1}, 2)), 0.0);
  const std::vector<double> f3{0.3, 0.7, 0.4};
  EXPECT_NEAR(joint_density_value(f3, validate_spec({1, 2}, {0}, 3)), 0.1, 1e-15);
}

TEST(JointDensityValue, SingletonIsIdentity) {
  RandomStream rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> f{rng.uniform(), rng.uniform(), rng.uniform()};
    EXPECT_EQ(joint_density_value(f, validate_spec({1}, {}, 3)), f[1]);
  }
}

TEST(JointDensityValue, MonotoneAndHomogeneous) {
  RandomStream rng(11);
  const auto specs = enumerate_joint_classes(4);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> f(4);
    for (double& v : f) v = rng.uniform();
    const auto& spec = specs[rng.index(specs.size())];
    const double base = joint_density_value(f, spec);
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<double> g = f;
      g[k] += 0.1;
      const double bumped = joint_density_value(g, spec);
      const bool in_i = std::count(spec.intersection().begin(), spec.intersection().end(), k);
      if (in_i) {
        EXPECT_GE(bumped, base);
      } else {
        EXPECT_LE(bumped, base);
      }
    }
    std::vector<double> scaled = f;
    for (double& v : scaled) v *= 4.0;
    EXPECT_DOUBLE_EQ(joint_density_value(scaled, spec), 4.0 * base);
  }
}

TEST(EnumerateJointClasses, Counts) {
  EXPECT_EQ(enumerate_joint_classes(1).size(), 1U);
  EXPECT_EQ(enumerate_joint_classes(1).front(), validate_spec({0}, {}, 1));
  EXPECT_EQ(enumerate_joint_classes(3).size(), 7U);
  EXPECT_EQ(enumerate_joint_classes(6).size(), 63U);
  EXPECT_THROW(enumerate_joint_classes(0), InvalidSpec);
  EXPECT_THROW(enumerate_joint_classes(17), InvalidSpec);
}

TEST(EnumerateJointClasses, SaturatedAndDistinct) {
  const auto specs = enumerate_joint_classes(5);
  std::set<std::string> seen;
  for (const auto& s : specs) {
    EXPECT_TRUE(s.saturated());
    EXPECT_FALSE(s.intersection().empty());
    seen.insert(format_spec(s));
  }
  EXPECT_EQ(seen.size(), specs.size());
}

TEST(OracleJointMass, Containment) {
  DiscreteLabelWorld world(2, {{0, 1}, {0}}, {0.7, 0.3});
  EXPECT_EQ(oracle_joint_mass(world, validate_spec({0}, {}, 2), 0), 0.7);
  EXPECT_EQ(oracle_joint_mass(world, validate_spec({0}, {1}, 2), 0), 0.0);
  EXPECT_EQ(oracle_joint_mass(world, validate_spec({0}, {1}, 2), 1), 0.3);
  EXPECT_THROW(oracle_joint_mass(world, validate_spec({0}, {}, 2), 5), Error);
  EXPECT_DOUBLE_EQ(world.class_mass(validate_spec({0}, {}, 2)), 1.0);
}

TEST(DiscreteLabelWorld, RejectsBadMasses) {
  EXPECT_THROW(DiscreteLabelWorld(2, {{0}}, {-1.0}), Error);
  EXPECT_THROW(DiscreteLabelWorld(2, {{0}}, {0.0}), Error);
  EXPECT_THROW(DiscreteLabelWorld(2, {{3}}, {1.0}), InvalidSpec);
}

TEST(OracleJointMass, AgreesWithFormulaOnRandomWorlds) {
  RandomStream rng(2026);
  for (int w = 0; w < 200; ++w) {
    const std::size_t n = 1 + rng.index(4);
    const std::size_t points = 1 + rng.index(64);
    std::vector<IndexSet> labels(points);
    std::vector<double> masses(points);
    for (std::size_t p = 0; p < points; ++p) {
      for (std::size_t k = 0; k < n; ++k) {
        if (rng.uniform() < 0.5) labels[p].push_back(k);
      }
      masses[p] = rng.uniform();
    }
    masses[0] += 0.1;
    const DiscreteLabelWorld world(n, labels, masses);
    for (const auto& spec : enumerate_joint_classes(n)) {
      for (std::size_t p = 0; p < points; ++p) {
        const auto f = world.class_values(p);
        EXPECT_EQ(joint_density_value(f, spec), oracle_joint_mass(world, spec, p));
      }
    }
  }
}

TEST(SpecText, RoundTripsNamesAndIndices) {
  const std::vector<std::string> names{"A", "B", "C"};
  const auto spec = validate_spec({0, 2}, {1}, 3);
  EXPECT_EQ(format_spec(spec, names), "+A+C-B");
  EXPECT_EQ(format_spec(spec), "+0+2-1");
  EXPECT_EQ(parse_spec("+A+C-B", 3, names), spec);
  EXPECT_EQ(parse_spec("+0 +2 -1", 3), spec);
  EXPECT_EQ(parse_spec("+A\xE2\x88\x92" "B", 3, names), validate_spec({0}, {1}, 3));
}

TEST(SpecText, Errors) {
  const std::vector<std::string> names{"A", "B"};
  EXPECT_THROW(parse_spec("", 2, names), InvalidSpec);
  EXPECT_THROW(parse_spec("A", 2, names), InvalidSpec);
  EXPECT_THROW(parse_spec("+Z", 2, names), InvalidSpec);
  EXPECT_THROW(parse_spec("-A", 2, names), InvalidSpec);
  EXPECT_THROW(parse_spec("+", 2, names), InvalidSpec);
}

}  // namespace
}  // namespace s2m
