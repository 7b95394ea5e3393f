#include "catdiff/corpus.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace catdiff {

nlohmann::json ClipRecord::to_json() const {
  nlohmann::json j{{"id", id}, {"labels", labels}};
  if (tokens) j["tokens"] = *tokens;
  return j;
}

ClipRecord ClipRecord::from_json(const nlohmann::json& j) {
  ClipRecord r;
  r.id = j.at("id").get<std::string>();
  r.labels = j.at("labels").get<std::vector<std::string>>();
  if (j.contains("tokens")) r.tokens = j.at("tokens").get<TokenSequence>();
  return r;
}

std::vector<std::string> mbtg(const std::vector<std::string>& labels, std::mt19937_64& rng) {
  if (labels.empty()) throw std::invalid_argument("mbtg: label list must be non-empty");
  for (const auto& l : labels) {
    if (l.empty()) throw std::invalid_argument("mbtg: empty label");
  }
  std::uniform_int_distribution<int> flank(1, 2);
  std::vector<std::string> out;
  for (const auto& label : labels) {
    const int left = flank(rng);
    const int right = flank(rng);
    for (int i = 0; i < left; ++i) out.emplace_back(kMaskToken);
    out.push_back(label);
    for (int i = 0; i < right; ++i) out.emplace_back(kMaskToken);
  }
  return out;
}

std::pair<std::vector<ClipRecord>, std::vector<ClipRecord>> curriculum_split(
    const std::vector<ClipRecord>& records) {
  std::vector<ClipRecord> ses, mes;
  for (const auto& r : records) {
    (r.labels.size() == 1 ? ses : mes).push_back(r);
  }
  return {std::move(ses), std::move(mes)};
}

CurriculumPlan curriculum_order(const std::vector<ClipRecord>& ses,
                                const std::vector<ClipRecord>& mes, int n) {
  (void)mes;
  if (n < 1) throw std::invalid_argument("curriculum_order: n must be >= 1");
  CurriculumPlan plan;
  plan.empty_ses_warning = ses.empty();
  int epoch = 0;
  if (!ses.empty()) {
    for (int i = 0; i < n; ++i) plan.passes.push_back({epoch++, Subset::SES});
  }
  for (int i = 0; i < 2 * n; ++i) plan.passes.push_back({epoch++, Subset::MES});
  return plan;
}

nlohmann::json CurriculumPlan::to_json() const {
  nlohmann::json passes_json = nlohmann::json::array();
  for (const auto& p : passes) {
    passes_json.push_back({{"epoch", p.epoch}, {"subset", p.subset == Subset::SES ? "SES" : "MES"}});
  }
  return nlohmann::json{{"passes", passes_json}, {"empty_ses_warning", empty_ses_warning}};
}

std::vector<WeightedExample> synth_dataset(const SynthSpec& spec) {
  if (spec.K < 2 || spec.N < 1 || spec.num_conditions < 1 || spec.sequences_per_condition < 1) {
    throw std::invalid_argument("synth_dataset: bad spec");
  }
  const double space = std::pow(static_cast<double>(spec.K), spec.N);
  if (spec.exhaustive && space > static_cast<double>(spec.enumeration_cap)) {
    throw std::invalid_argument("synth_dataset: K^N exceeds the enumeration cap");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> pick(0, spec.K - 1);
  std::uniform_real_distribution<double> unif(0.1, 1.0);

  std::vector<WeightedExample> out;
  for (int c = 0; c < spec.num_conditions; ++c) {
    std::vector<WeightedExample> group;
    if (spec.exhaustive) {
      TokenSequence seq(spec.N, 0);
      while (true) {
        group.push_back({Condition{c}, seq, unif(rng)});
        int pos = 0;
        while (pos < spec.N && ++seq[pos] == spec.K) seq[pos++] = 0;
        if (pos == spec.N) break;
      }
    } else {
      for (int s = 0; s < spec.sequences_per_condition; ++s) {
        TokenSequence seq(spec.N);
        for (int i = 0; i < spec.N; ++i) seq[i] = pick(rng);
        group.push_back({Condition{c}, seq, unif(rng)});
      }
    }
    double total = 0.0;
    for (const auto& e : group) total += e.weight;
    for (auto& e : group) e.weight /= total;
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

std::string to_jsonl(const std::vector<ClipRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << r.to_json().dump() << '\n';
  return out.str();
}

std::vector<ClipRecord> records_from_jsonl(const std::string& text) {
  std::vector<ClipRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(ClipRecord::from_json(nlohmann::json::parse(line)));
  }
  return out;
}

nlohmann::json weighted_example_to_json(const WeightedExample& e) {
  return nlohmann::json{{"condition", e.cond.id}, {"tokens", e.tokens}, {"weight", e.weight}};
}

WeightedExample weighted_example_from_json(const nlohmann::json& j) {
  WeightedExample e;
  e.cond.id = j.at("condition").get<int>();
  e.tokens = j.at("tokens").get<TokenSequence>();
  e.weight = j.at("weight").get<double>();
  return e;
}

}  // namespace catdiff
