/* Copyright 2026 The mmgraph Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mmg {

enum class RelevanceLabel : std::uint8_t { kExcellent = 0, kGood = 1, kAcceptable = 2, kUnacceptable = 3 };

inline constexpr std::array<RelevanceLabel, 4> kAllLabels = {
    RelevanceLabel::kExcellent, RelevanceLabel::kGood, RelevanceLabel::kAcceptable,
    RelevanceLabel::kUnacceptable};

std::string_view to_string(RelevanceLabel label);
RelevanceLabel parse_label(std::string_view name);  // case-insensitive
int gain_of(RelevanceLabel label);                   // 3, 2, 1, 0

// kExponential: 2^g - 1; kLinear: g.
enum class GainVariant { kExponential, kLinear };

struct EvalJudgment {
  std::string query_id;
  std::uint32_t rank = 0;  // 1-based
  RelevanceLabel label = RelevanceLabel::kUnacceptable;
};

// Judgments of one query, in any order. Ranks must form 1..n without gaps.
double ndcg_at(const std::vector<EvalJudgment>& judgments, std::uint32_t p,
               GainVariant variant = GainVariant::kExponential);
// Same on a plain gain sequence listed by rank.
double ndcg_of_gains(const std::vector<int>& gains_by_rank, std::uint32_t p,
                     GainVariant variant = GainVariant::kExponential);

std::map<std::string, std::vector<EvalJudgment>> group_by_query(
    const std::vector<EvalJudgment>& all);

double mean_ndcg(const std::vector<EvalJudgment>& all, std::uint32_t p,
                 GainVariant variant = GainVariant::kExponential);

struct LabelDistribution {
  std::array<std::uint64_t, 4> counts{};
  std::array<std::uint32_t, 4> percentages{};
  std::uint64_t total = 0;
};

LabelDistribution label_distribution(const std::array<std::uint64_t, 4>& counts);
LabelDistribution label_distribution(const std::vector<EvalJudgment>& all);

std::vector<EvalJudgment> parse_judgments_csv(std::string_view text);
std::vector<EvalJudgment> read_judgments_csv(const std::filesystem::path& path);

nlohmann::ordered_json eval_report(const std::vector<EvalJudgment>& all,
                                   GainVariant variant = GainVariant::kExponential);

}  // namespace mmg
