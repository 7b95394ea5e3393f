#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catdiff/types.hpp"

namespace catdiff {

/// One labeled clip. Synthetic datasets attach ground-truth token sequences.
struct ClipRecord {
  std::string id;
  std::vector<std::string> labels;
  std::optional<TokenSequence> tokens;

  nlohmann::json to_json() const;
  static ClipRecord from_json(const nlohmann::json& j);
};

inline constexpr const char* kMaskToken = "[MASK]";

/// Mask-based text generation: each label is flanked by 1 or 2 mask tokens
/// per side, drawn independently per side and per label.
std::vector<std::string> mbtg(const std::vector<std::string>& labels, std::mt19937_64& rng);

/// Partition into the single-event set (exactly one label) and the
/// multiple-event set, preserving input order within each subset.
std::pair<std::vector<ClipRecord>, std::vector<ClipRecord>> curriculum_split(
    const std::vector<ClipRecord>& records);

enum class Subset { SES, MES };

struct TrainingPass {
  int epoch = 0;
  Subset subset = Subset::SES;
};

struct CurriculumPlan {
  std::vector<TrainingPass> passes;  // n SES passes, then 2n MES passes
  bool empty_ses_warning = false;

  nlohmann::json to_json() const;
};

CurriculumPlan curriculum_order(const std::vector<ClipRecord>& ses,
                                const std::vector<ClipRecord>& mes, int n);

struct SynthSpec {
  int K = 2;
  int N = 1;
  int num_conditions = 1;
  int sequences_per_condition = 1;
  std::uint64_t seed = 0;
  bool exhaustive = false;  // emit all K^N sequences per condition
  long long enumeration_cap = 4096;
};

struct WeightedExample {
  Condition cond;
  TokenSequence tokens;
  double weight = 1.0;
};

/// Reproducible weighted token dataset; weights sum to 1 per condition.
std::vector<WeightedExample> synth_dataset(const SynthSpec& spec);

std::string to_jsonl(const std::vector<ClipRecord>& records);
std::vector<ClipRecord> records_from_jsonl(const std::string& text);

nlohmann::json weighted_example_to_json(const WeightedExample& e);
WeightedExample weighted_example_from_json(const nlohmann::json& j);

}  // namespace catdiff
