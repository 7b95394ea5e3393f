#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "catdiff/corpus.hpp"

using namespace catdiff;

TEST_CASE("mbtg flanks every label with 1 or 2 masks per side") {
  SUBCASE("single label structure") {
    std::mt19937_64 rng(0);
    const auto text = mbtg({"dog bark"}, rng);
    int left = 0;
    std::size_t i = 0;
    while (i < text.size() && text[i] == kMaskToken) {
      ++left;
      ++i;
    }
    REQUIRE(i < text.size());
    CHECK(text[i] == "dog bark");
    const int right = static_cast<int>(text.size() - i - 1);
    CHECK((left == 1 || left == 2));
    CHECK((right == 1 || right == 2));
  }
  SUBCASE("label order preserved and counts valid across seeds") {
    const std::vector<std::string> labels{"a", "b", "c"};
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      std::mt19937_64 rng(seed);
      const auto text = mbtg(labels, rng);
      std::vector<std::string> seen;
      int run = 0;
      for (const auto& tok : text) {
        if (tok == kMaskToken) {
          ++run;
        } else {
          seen.push_back(tok);
          run = 0;
        }
      }
      CHECK(seen == labels);
      // Between labels two flanks concatenate: runs of 2..4; edges 1..2.
      CHECK(text.front() == kMaskToken);
      CHECK(text.back() == kMaskToken);
      (void)run;
    }
  }
  SUBCASE("flank draws are near 50/50 over 10k runs") {
    int left_ones = 0;
    const int runs = 10000;
    for (int seed = 0; seed < runs; ++seed) {
      std::mt19937_64 rng(seed);
      const auto text = mbtg({"x"}, rng);
      int left = 0;
      for (const auto& tok : text) {
        if (tok == kMaskToken) {
          ++left;
        } else {
          break;
        }
      }
      if (left == 1) ++left_ones;
    }
    CHECK(std::abs(left_ones / static_cast<double>(runs) - 0.5) < 0.02);
  }
  SUBCASE("invalid inputs rejected") {
    std::mt19937_64 rng(0);
    CHECK_THROWS_AS(mbtg({}, rng), std::invalid_argument);
    CHECK_THROWS_AS(mbtg({"ok", ""}, rng), std::invalid_argument);
  }
  SUBCASE("deterministic under a fixed seed") {
    std::mt19937_64 a(9), b(9);
    CHECK(mbtg({"p", "q"}, a) == mbtg({"p", "q"}, b));
  }
}

TEST_CASE("curriculum_split is an order-preserving partition") {
  SUBCASE("empty input") {
    const auto [ses, mes] = curriculum_split({});
    CHECK(ses.empty());
    CHECK(mes.empty());
  }
  SUBCASE("one single-label and one multi-label record") {
    std::vector<ClipRecord> recs{{"a", {"dog"}, {}}, {"b", {"dog", "rain", "car"}, {}}};
    const auto [ses, mes] = curriculum_split(recs);
    REQUIRE(ses.size() == 1);
    REQUIRE(mes.size() == 1);
    CHECK(ses[0].id == "a");
    CHECK(mes[0].id == "b");
  }
  SUBCASE("100 random records partition exactly") {
    std::mt19937_64 rng(13);
    std::vector<ClipRecord> recs;
    for (int i = 0; i < 100; ++i) {
      const int n = 1 + static_cast<int>(rng() % 4);
      std::vector<std::string> labels(n, "l");
      recs.push_back({"id" + std::to_string(i), labels, {}});
    }
    const auto [ses, mes] = curriculum_split(recs);
    CHECK(ses.size() + mes.size() == 100);
    for (const auto& r : ses) CHECK(r.labels.size() == 1);
    for (const auto& r : mes) CHECK(r.labels.size() >= 2);
    std::set<std::string> ids;
    for (const auto& r : ses) ids.insert(r.id);
    for (const auto& r : mes) ids.insert(r.id);
    CHECK(ids.size() == 100);
  }
}

TEST_CASE("curriculum_order emits n SES passes then 2n MES passes") {
  const std::vector<ClipRecord> ses{{"a", {"x"}, {}}};
  const std::vector<ClipRecord> mes{{"b", {"x", "y"}, {}}};
  SUBCASE("n = 1") {
    const auto plan = curriculum_order(ses, mes, 1);
    REQUIRE(plan.passes.size() == 3);
    CHECK(plan.passes[0].subset == Subset::SES);
    CHECK(plan.passes[1].subset == Subset::MES);
    CHECK(plan.passes[2].subset == Subset::MES);
    CHECK_FALSE(plan.empty_ses_warning);
  }
  SUBCASE("n = 3") {
    const auto plan = curriculum_order(ses, mes, 3);
    REQUIRE(plan.passes.size() == 9);
    for (int i = 0; i < 3; ++i) CHECK(plan.passes[i].subset == Subset::SES);
    for (int i = 3; i < 9; ++i) CHECK(plan.passes[i].subset == Subset::MES);
    for (int i = 0; i < 9; ++i) CHECK(plan.passes[i].epoch == i);
  }
  SUBCASE("empty SES yields an MES-only flagged plan") {
    const auto plan = curriculum_order({}, mes, 2);
    CHECK(plan.empty_ses_warning);
    REQUIRE(plan.passes.size() == 4);
    for (const auto& p : plan.passes) CHECK(p.subset == Subset::MES);
    const auto j = plan.to_json();
    CHECK(j.at("empty_ses_warning") == true);
    CHECK(j.at("passes").size() == 4);
  }
  SUBCASE("n < 1 rejected") {
    CHECK_THROWS_AS(curriculum_order(ses, mes, 0), std::invalid_argument);
  }
}

TEST_CASE("synth_dataset reproducibility and weighting") {
  SUBCASE("single sequence per condition gets weight 1") {
    SynthSpec spec;
    spec.K = 4;
    spec.N = 3;
    spec.sequences_per_condition = 1;
    const auto ds = synth_dataset(spec);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].weight == 1.0);
  }
  SUBCASE("same seed twice is identical") {
    SynthSpec spec;
    spec.K = 5;
    spec.N = 2;
    spec.num_conditions = 3;
    spec.sequences_per_condition = 4;
    spec.seed = 99;
    const auto a = synth_dataset(spec);
    const auto b = synth_dataset(spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].cond.id == b[i].cond.id);
      CHECK(a[i].tokens == b[i].tokens);
      CHECK(a[i].weight == b[i].weight);
    }
  }
  SUBCASE("exhaustive mode enumerates all K^N sequences with normalized weights") {
    SynthSpec spec;
    spec.K = 4;
    spec.N = 2;
    spec.exhaustive = true;
    const auto ds = synth_dataset(spec);
    REQUIRE(ds.size() == 16);
    std::set<TokenSequence> unique;
    double total = 0.0;
    for (const auto& e : ds) {
      unique.insert(e.tokens);
      total += e.weight;
    }
    CHECK(unique.size() == 16);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("weights sum to 1 per condition") {
    SynthSpec spec;
    spec.K = 3;
    spec.N = 2;
    spec.num_conditions = 4;
    spec.sequences_per_condition = 5;
    const auto ds = synth_dataset(spec);
    std::map<int, double> totals;
    for (const auto& e : ds) totals[e.cond.id] += e.weight;
    REQUIRE(totals.size() == 4);
    for (const auto& [cond, total] : totals) {
      (void)cond;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("exhaustive cap enforced") {
    SynthSpec spec;
    spec.K = 10;
    spec.N = 5;  // 100000 > 4096
    spec.exhaustive = true;
    CHECK_THROWS_AS(synth_dataset(spec), std::invalid_argument);
  }
}

TEST_CASE("JSONL round-trips") {
  std::vector<ClipRecord> recs{{"a", {"dog"}, TokenSequence{1, 2, 3}},
                               {"b", {"dog", "rain"}, std::nullopt}};
  const auto text = to_jsonl(recs);
  const auto back = records_from_jsonl(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "a");
  CHECK(back[0].tokens == TokenSequence{1, 2, 3});
  CHECK(back[1].labels == std::vector<std::string>{"dog", "rain"});
  CHECK_FALSE(back[1].tokens.has_value());

  const WeightedExample we{{2}, {0, 1}, 0.25};
  const auto we_back = weighted_example_from_json(weighted_example_to_json(we));
  CHECK(we_back.cond.id == 2);
  CHECK(we_back.tokens == we.tokens);
  CHECK(we_back.weight == 0.25);
}
