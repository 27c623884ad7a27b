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

#include "mmg/eval.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmg/error.hpp"

namespace mmg {
namespace {

double gain_value(int g, GainVariant v) {
  return v == GainVariant::kExponential ? std::exp2(static_cast<double>(g)) - 1.0
                                        : static_cast<double>(g);
}

double dcg(const std::vector<int>& gains, std::uint32_t p, GainVariant v) {
  double s = 0.0;
  for (std::uint32_t i = 0; i < p; ++i) s += gain_value(gains[i], v) / std::log2(i + 2.0);
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(RelevanceLabel label) {
  switch (label) {
    case RelevanceLabel::kExcellent: return "Excellent";
    case RelevanceLabel::kGood: return "Good";
    case RelevanceLabel::kAcceptable: return "Acceptable";
    case RelevanceLabel::kUnacceptable: return "Unacceptable";
  }
  return "Unacceptable";
}

RelevanceLabel parse_label(std::string_view name) {
  std::string lower;
  for (char c : trim(name)) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (RelevanceLabel l : kAllLabels) {
    std::string candidate(to_string(l));
    std::transform(candidate.begin(), candidate.end(), candidate.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (candidate == lower) return l;
  }
  throw Error(ErrorCode::kParseError, "unknown relevance label '" + std::string(name) + "'");
}

int gain_of(RelevanceLabel label) { return 3 - static_cast<int>(label); }

double ndcg_of_gains(const std::vector<int>& gains_by_rank, std::uint32_t p, GainVariant variant) {
  if (p == 0) throw Error(ErrorCode::kInvalidConfig, "p must be >= 1");
  if (gains_by_rank.size() < p) {
    throw Error(ErrorCode::kMissingRanks, "need ranks 1.." + std::to_string(p) + ", have " +
                                              std::to_string(gains_by_rank.size()));
  }
  std::vector<int> ideal = gains_by_rank;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal, p, variant);
  if (idcg == 0.0) return 0.0;
  return dcg(gains_by_rank, p, variant) / idcg;
}

double ndcg_at(const std::vector<EvalJudgment>& judgments, std::uint32_t p, GainVariant variant) {
  std::vector<const EvalJudgment*> sorted;
  for (const auto& j : judgments) sorted.push_back(&j);
  std::sort(sorted.begin(), sorted.end(),
            [](const EvalJudgment* a, const EvalJudgment* b) { return a->rank < b->rank; });
  std::vector<int> gains;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i]->rank != i + 1) {
      throw Error(ErrorCode::kMissingRanks,
                  "query '" + sorted[i]->query_id + "' ranks are not a gap-free prefix 1..n");
    }
    gains.push_back(gain_of(sorted[i]->label));
  }
  return ndcg_of_gains(gains, p, variant);
}

std::map<std::string, std::vector<EvalJudgment>> group_by_query(const std::vector<EvalJudgment>& all) {
  std::map<std::string, std::vector<EvalJudgment>> by;
  for (const auto& j : all) by[j.query_id].push_back(j);
  return by;
}

double mean_ndcg(const std::vector<EvalJudgment>& all, std::uint32_t p, GainVariant variant) {
  const auto by = group_by_query(all);
  if (by.empty()) throw Error(ErrorCode::kNoQueries, "no judgments");
  double s = 0.0;
  for (const auto& [id, js] : by) s += ndcg_at(js, p, variant);
  return s / static_cast<double>(by.size());
}

LabelDistribution label_distribution(const std::array<std::uint64_t, 4>& counts) {
  LabelDistribution d;
  d.counts = counts;
  for (auto c : counts) d.total += c;
  if (d.total == 0) return d;
  for (std::size_t i = 0; i < 4; ++i) {
    // round-half-up(100 * c / total) in exact integer arithmetic
    d.percentages[i] = static_cast<std::uint32_t>((200 * counts[i] + d.total) / (2 * d.total));
  }
  return d;
}

LabelDistribution label_distribution(const std::vector<EvalJudgment>& all) {
  std::array<std::uint64_t, 4> counts{};
  for (const auto& j : all) ++counts[static_cast<std::size_t>(j.label)];
  return label_distribution(counts);
}

std::vector<EvalJudgment> parse_judgments_csv(std::string_view text) {
  std::vector<EvalJudgment> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    if (!header_seen) {
      if (row != "query_id,rank,label") {
        throw Error(ErrorCode::kParseError, "expected header query_id,rank,label");
      }
      header_seen = true;
      continue;
    }
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": expected 3 fields");
    }
    EvalJudgment j;
    j.query_id = std::string(trim(row.substr(0, c1)));
    const auto rank = trim(row.substr(c1 + 1, c2 - c1 - 1));
    const auto [ptr, ec] = std::from_chars(rank.data(), rank.data() + rank.size(), j.rank);
    if (ec != std::errc{} || ptr != rank.data() + rank.size() || j.rank == 0 || j.query_id.empty()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": bad row");
    }
    j.label = parse_label(row.substr(c2 + 1));
    out.push_back(std::move(j));
  }
  if (!header_seen) throw Error(ErrorCode::kParseError, "empty judgments file");
  return out;
}

std::vector<EvalJudgment> read_judgments_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_judgments_csv(ss.str());
}

nlohmann::ordered_json eval_report(const std::vector<EvalJudgment>& all, GainVariant variant) {
  using nlohmann::ordered_json;
  const auto by = group_by_query(all);
  if (by.empty()) throw Error(ErrorCode::kNoQueries, "no judgments");
  const auto dist = label_distribution(all);

  ordered_json report;
  ordered_json gains = ordered_json::object();
  ordered_json counts = ordered_json::object();
  ordered_json pct = ordered_json::object();
  for (RelevanceLabel l : kAllLabels) {
    const std::string name(to_string(l));
    gains[name] = gain_of(l);
    counts[name] = dist.counts[static_cast<std::size_t>(l)];
    pct[name] = dist.percentages[static_cast<std::size_t>(l)];
  }
  report["gain_variant"] = variant == GainVariant::kExponential ? "exponential" : "linear";
  report["gains"] = gains;
  report["counts"] = counts;
  report["percentages"] = pct;

  ordered_json per_query = ordered_json::array();
  double sum3 = 0.0, sum5 = 0.0;
  std::size_t n3 = 0, n5 = 0;
  for (const auto& [id, js] : by) {
    ordered_json q;
    q["query_id"] = id;
    q["judgments"] = js.size();
    if (js.size() >= 3) {
      const double v = ndcg_at(js, 3, variant);
      q["ndcg@3"] = v;
      sum3 += v;
      ++n3;
    }
    if (js.size() >= 5) {
      const double v = ndcg_at(js, 5, variant);
      q["ndcg@5"] = v;
      sum5 += v;
      ++n5;
    }
    per_query.push_back(std::move(q));
  }
  ordered_json ndcg = ordered_json::object();
  ndcg["3"] = n3 ? ordered_json(sum3 / static_cast<double>(n3)) : ordered_json(nullptr);
  ndcg["5"] = n5 ? ordered_json(sum5 / static_cast<double>(n5)) : ordered_json(nullptr);
  report["ndcg"] = ndcg;
  report["per_query"] = per_query;
  return report;
}

}  // namespace mmg
