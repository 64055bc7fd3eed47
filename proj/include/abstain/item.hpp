// Copyright 2026 The Abstain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Domain types shared by the environment, the policy and the trainer.

#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abstain/common.hpp"
#include "abstain/textmetrics.hpp"

namespace abstain {

// Closed interval of years.
struct TimeInterval {
  int start = 0;
  int end = 0;

  TimeInterval() = default;
  TimeInterval(int s, int e) : start(s), end(e) {
    if (s > e) throw UsageError("TimeInterval: start > end");
  }
  bool contains(int year) const { return start <= year && year <= end; }
  bool intersects(const TimeInterval& o) const {
    return start <= o.end && o.start <= end;
  }
  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

struct TemporalFact {
  std::string subject;
  std::string relation;
  std::string object;
  TimeInterval scope;
  friend bool operator==(const TemporalFact&, const TemporalFact&) = default;
};

inline constexpr int kEarliestYear = std::numeric_limits<int>::min() / 2;
inline constexpr int kLatestYear = std::numeric_limits<int>::max() / 2;

class TimeSpecifier {
 public:
  enum class Kind { InYear, Between, After, Before, EarlyDecade };

  static TimeSpecifier in_year(int y) { return {Kind::InYear, y, y}; }
  static TimeSpecifier between(int a, int b) {
    if (a > b) throw UsageError("TimeSpecifier::between: a > b");
    return {Kind::Between, a, b};
  }
  static TimeSpecifier after(int y) { return {Kind::After, y, y}; }
  static TimeSpecifier before(int y) { return {Kind::Before, y, y}; }
  static TimeSpecifier early_decade(int decade) {
    if (decade % 10 != 0) throw UsageError("TimeSpecifier::early_decade: not a decade");
    return {Kind::EarlyDecade, decade, decade};
  }

  Kind kind() const { return kind_; }
  int first() const { return a_; }
  int second() const { return b_; }

  // The set of years a fact scope must intersect to satisfy the specifier.
  TimeInterval window() const {
    switch (kind_) {
      case Kind::InYear: return {a_, a_};
      case Kind::Between: return {a_, b_};
      case Kind::After: return {a_ + 1, kLatestYear};
      case Kind::Before: return {kEarliestYear, a_ - 1};
      case Kind::EarlyDecade: return {a_, a_ + 3};
    }
    return {};
  }

  bool is_hard() const {
    return kind_ == Kind::After || kind_ == Kind::Before || kind_ == Kind::EarlyDecade;
  }

  std::string phrase() const {
    switch (kind_) {
      case Kind::InYear: return "in " + std::to_string(a_);
      case Kind::Between:
        return "from " + std::to_string(a_) + " to " + std::to_string(b_);
      case Kind::After: return "after " + std::to_string(a_);
      case Kind::Before: return "before " + std::to_string(a_);
      case Kind::EarlyDecade: return "in the early " + std::to_string(a_) + "s";
    }
    return {};
  }

  friend bool operator==(const TimeSpecifier&, const TimeSpecifier&) = default;

 private:
  TimeSpecifier(Kind k, int a, int b) : kind_(k), a_(a), b_(b) {}
  Kind kind_;
  int a_;
  int b_;
};

inline std::string_view to_string(TimeSpecifier::Kind k) {
  switch (k) {
    case TimeSpecifier::Kind::InYear: return "in_year";
    case TimeSpecifier::Kind::Between: return "between";
    case TimeSpecifier::Kind::After: return "after";
    case TimeSpecifier::Kind::Before: return "before";
    case TimeSpecifier::Kind::EarlyDecade: return "early_decade";
  }
  return "?";
}

enum class Evidence { Supports = 0, Contradicts = 1, NoEvidence = 2 };
enum class Difficulty { Easy = 0, Hard = 1 };

inline constexpr std::size_t kNumFeatures = 6;
inline constexpr std::array<Evidence, 3> kAllEvidence = {
    Evidence::Supports, Evidence::Contradicts, Evidence::NoEvidence};

inline std::string_view to_string(Evidence e) {
  switch (e) {
    case Evidence::Supports: return "supports";
    case Evidence::Contradicts: return "contradicts";
    case Evidence::NoEvidence: return "no_evidence";
  }
  return "?";
}

inline std::string_view to_string(Difficulty d) {
  return d == Difficulty::Easy ? "easy" : "hard";
}

// The observable part of a question: what the evidence looks like and how
// hard the time specifier is.
struct ContextFeature {
  Evidence evidence = Evidence::NoEvidence;
  Difficulty difficulty = Difficulty::Easy;

  std::size_t row() const {
    return static_cast<std::size_t>(evidence) * 2 + static_cast<std::size_t>(difficulty);
  }
  static ContextFeature from_row(std::size_t row) {
    if (row >= kNumFeatures) throw UsageError("ContextFeature: row out of range");
    return {static_cast<Evidence>(row / 2), static_cast<Difficulty>(row % 2)};
  }
  std::string name() const {
    return std::string(to_string(evidence)) + "/" + std::string(to_string(difficulty));
  }
  friend bool operator==(const ContextFeature&, const ContextFeature&) = default;
};

struct SynthQAItem {
  std::string id;
  std::string question;
  std::string context;
  std::vector<TemporalFact> facts;
  std::optional<TimeSpecifier> specifier;
  GoldAnswer gold = GoldAnswer::no_answer();
  std::string candidate_a;
  std::string candidate_b;
  ContextFeature feature;
};

}  // namespace abstain
