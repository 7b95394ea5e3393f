// Command-line driver for the categorical-diffusion library: demos, training,
// inference, benchmarks, corpus utilities, and evaluation metrics. All
// commands are deterministic under a fixed seed and echo the seed in their
// output metadata. Exit codes: 0 success, 2 validation error, 1 runtime error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "catdiff/codebook.hpp"
#include "catdiff/corpus.hpp"
#include "catdiff/denoiser.hpp"
#include "catdiff/diffusion.hpp"
#include "catdiff/metrics.hpp"
#include "catdiff/schedule.hpp"
#include "catdiff/transition.hpp"

namespace {

using nlohmann::json;

long long oracle_cap_from_env() {
  if (const char* v = std::getenv("DIFFCORE_ORACLE_CAP")) {
    return std::stoll(v);
  }
  return 4096;
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

catdiff::ScheduleTargets default_targets(catdiff::MatrixKind kind, double gamma_bar_T) {
  catdiff::ScheduleTargets t;
  switch (kind) {
    case catdiff::MatrixKind::Uniform:
      t.alpha_bar_T = 0.0;
      break;
    case catdiff::MatrixKind::Mask:
      t.gamma_bar_T = gamma_bar_T < 0 ? 1.0 : gamma_bar_T;
      break;
    case catdiff::MatrixKind::MaskUniform:
      t.alpha_bar_T = 0.0;
      t.gamma_bar_T = gamma_bar_T < 0 ? 0.9 : gamma_bar_T;
      break;
  }
  return t;
}

std::vector<catdiff::OracleDenoiser::Entry> oracle_entries(
    const std::vector<catdiff::WeightedExample>& dataset) {
  std::vector<catdiff::OracleDenoiser::Entry> entries;
  for (const auto& e : dataset) entries.push_back({e.cond, e.tokens, e.weight});
  return entries;
}

struct DemoArgs {
  std::string kind = "mask-uniform";
  int K = 8;
  int T = 16;
  int length = 8;
  int stride = 1;
  double gamma_bar_T = -1.0;
  std::uint64_t seed = 0;
  std::string out = "demo.jsonl";
};

int cmd_demo(const DemoArgs& a) {
  const auto kind = catdiff::matrix_kind_from_string(a.kind);
  const auto schedule =
      catdiff::build_linear_schedule(kind, a.K, a.T, default_targets(kind, a.gamma_bar_T));
  const catdiff::TransitionModel model(schedule);
  std::mt19937_64 rng(a.seed);

  catdiff::SynthSpec spec;
  spec.K = a.K;
  spec.N = a.length;
  spec.sequences_per_condition = 4;
  spec.seed = a.seed;
  const auto dataset = catdiff::synth_dataset(spec);
  const catdiff::OracleDenoiser denoiser(model, oracle_entries(dataset), /*joint_mode=*/true);

  std::ostringstream lines;
  const json meta{{"seed", a.seed}, {"kind", a.kind},     {"K", a.K},
                  {"T", a.T},       {"stride", a.stride}, {"length", a.length}};
  lines << meta.dump() << '\n';

  // Forward corruption of the first dataset sequence.
  const catdiff::TokenSequence x0 = dataset.front().tokens;
  for (int t = 0; t <= a.T; ++t) {
    const auto x_t = catdiff::forward_sample(model, x0, t, rng);
    lines << json{{"phase", "forward"}, {"t", t}, {"tokens", x_t}}.dump() << '\n';
  }

  // Reverse generation, recording each visited timestep.
  const auto ts = catdiff::stride_schedule(a.T, a.stride);
  catdiff::TokenSequence x(a.length);
  const auto stationary = model.stationary_distribution();
  for (int i = 0; i < a.length; ++i) x[i] = catdiff::sample_categorical(stationary, rng);
  lines << json{{"phase", "reverse"}, {"t", a.T}, {"tokens", x}}.dump() << '\n';
  const catdiff::Condition cond = dataset.front().cond;
  for (std::size_t step = 0; step + 1 < ts.size(); ++step) {
    const int t = ts[step];
    const int delta = t - ts[step + 1];
    const auto x0_hat = denoiser.sample_joint_x0(x, t, cond, rng);
    for (int i = 0; i < a.length; ++i) {
      x[i] = catdiff::sample_categorical(catdiff::strided_posterior(model, x[i], (*x0_hat)[i], t, delta), rng);
    }
    lines << json{{"phase", "reverse"}, {"t", ts[step + 1]}, {"tokens", x}}.dump() << '\n';
  }

  atomic_write(a.out, lines.str());
  std::cout << json{{"command", "demo"}, {"seed", a.seed}, {"out", a.out}}.dump() << '\n';
  return 0;
}

struct BenchmarkArgs {
  std::vector<int> Ts{25, 50, 100};
  std::vector<int> strides{1, 3, 5, 7};
  int samples = 2000;
  int K = 4;
  int length = 2;
  std::uint64_t seed = 0;
  std::string out = "benchmark.csv";
};

int cmd_benchmark(const BenchmarkArgs& a) {
  catdiff::SynthSpec spec;
  spec.K = a.K;
  spec.N = a.length;
  spec.sequences_per_condition = 3;
  spec.seed = a.seed;
  const auto dataset = catdiff::synth_dataset(spec);
  const catdiff::Condition cond = dataset.front().cond;

  // Ground-truth distribution over joint outcomes for the TV column.
  std::map<catdiff::TokenSequence, double> data_dist;
  for (const auto& e : dataset) data_dist[e.tokens] += e.weight;

  std::ostringstream csv;
  csv << "T,stride,steps,wall_time_s,tv_to_data\n";
  for (int T : a.Ts) {
    const auto schedule = catdiff::build_linear_schedule(
        catdiff::MatrixKind::MaskUniform, a.K, T, {0.0, 0.9});
    const catdiff::TransitionModel model(schedule);
    const catdiff::OracleDenoiser denoiser(model, oracle_entries(dataset), true,
                                           oracle_cap_from_env());
    for (int stride : a.strides) {
      const int steps = static_cast<int>(catdiff::stride_schedule(T, stride).size()) - 1;
      std::mt19937_64 rng(a.seed);
      std::map<catdiff::TokenSequence, double> hist;
      const auto start = std::chrono::steady_clock::now();
      for (int s = 0; s < a.samples; ++s) {
        hist[catdiff::infer(model, denoiser, cond, a.length, stride, rng)] += 1.0;
      }
      const auto stop = std::chrono::steady_clock::now();
      const double wall = std::chrono::duration<double>(stop - start).count();

      double tv = 0.0;
      for (const auto& [seq, w] : data_dist) {
        auto it = hist.find(seq);
        const double emp = it == hist.end() ? 0.0 : it->second / a.samples;
        tv += std::abs(w - emp);
      }
      for (const auto& [seq, c] : hist) {
        if (!data_dist.count(seq)) tv += c / a.samples;
      }
      tv *= 0.5;
      csv << T << ',' << stride << ',' << steps << ',' << wall << ',' << tv << '\n';
    }
  }
  atomic_write(a.out, csv.str());
  std::cout << json{{"command", "benchmark"}, {"seed", a.seed}, {"out", a.out}}.dump() << '\n';
  return 0;
}

struct TrainArgs {
  std::string kind = "mask-uniform";
  int K = 4;
  int T = 10;
  int epochs = 100;
  double lambda = catdiff::kDefaultLossWeight;
  double lr = 0.5;
  double gamma_bar_T = -1.0;
  std::uint64_t seed = 0;
  std::string data;  // optional JSONL of weighted examples
  int length = 2;
  int num_conditions = 1;
  int sequences = 2;
  std::string params_out = "params.json";
  std::string trace_out = "trace.csv";
};

std::vector<catdiff::WeightedExample> load_or_synth(const TrainArgs& a) {
  if (!a.data.empty()) {
    std::vector<catdiff::WeightedExample> out;
    std::istringstream in(read_file(a.data));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      out.push_back(catdiff::weighted_example_from_json(json::parse(line)));
    }
    return out;
  }
  catdiff::SynthSpec spec;
  spec.K = a.K;
  spec.N = a.length;
  spec.num_conditions = a.num_conditions;
  spec.sequences_per_condition = a.sequences;
  spec.seed = a.seed;
  return catdiff::synth_dataset(spec);
}

int cmd_train(const TrainArgs& a) {
  const auto kind = catdiff::matrix_kind_from_string(a.kind);
  const auto schedule =
      catdiff::build_linear_schedule(kind, a.K, a.T, default_targets(kind, a.gamma_bar_T));
  const catdiff::TransitionModel model(schedule);
  const auto dataset = load_or_synth(a);

  int max_cond = 0;
  std::vector<std::pair<catdiff::Condition, catdiff::TokenSequence>> pairs;
  for (const auto& e : dataset) {
    pairs.emplace_back(e.cond, e.tokens);
    max_cond = std::max(max_cond, e.cond.id);
  }
  catdiff::TabularDenoiser denoiser(max_cond + 1, a.T, model.total_categories(), a.K, a.lr);

  std::mt19937_64 rng(a.seed);
  const auto trace = catdiff::train(model, denoiser, pairs, a.epochs, rng, a.lambda);

  std::ostringstream csv;
  csv << "epoch,mean_vlb,mean_aux,mean_total\n";
  csv.precision(17);
  for (std::size_t e = 0; e < trace.size(); ++e) {
    csv << e << ',' << trace[e].mean_vlb << ',' << trace[e].mean_aux << ','
        << trace[e].mean_total << '\n';
  }
  atomic_write(a.trace_out, csv.str());
  atomic_write(a.params_out, denoiser.to_json().dump(2) + "\n");
  std::cout << json{{"command", "train"},
                    {"seed", a.seed},
                    {"epochs", a.epochs},
                    {"params_out", a.params_out},
                    {"trace_out", a.trace_out}}
                   .dump()
            << '\n';
  return 0;
}

struct InferArgs {
  std::string kind = "mask-uniform";
  int K = 4;
  int T = 10;
  int stride = 1;
  int length = 2;
  int cond = 0;
  double gamma_bar_T = -1.0;
  std::uint64_t seed = 0;
  std::string params;  // tabular JSON; empty means oracle over --data
  std::string data;
  std::string out = "infer.json";
};

int cmd_infer(const InferArgs& a) {
  const auto kind = catdiff::matrix_kind_from_string(a.kind);
  const auto schedule =
      catdiff::build_linear_schedule(kind, a.K, a.T, default_targets(kind, a.gamma_bar_T));
  const catdiff::TransitionModel model(schedule);
  std::mt19937_64 rng(a.seed);

  catdiff::TokenSequence tokens;
  if (!a.params.empty()) {
    const auto denoiser = catdiff::TabularDenoiser::from_json(json::parse(read_file(a.params)));
    tokens = catdiff::infer(model, denoiser, {a.cond}, a.length, a.stride, rng);
  } else if (!a.data.empty()) {
    std::vector<catdiff::WeightedExample> dataset;
    std::istringstream in(read_file(a.data));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      dataset.push_back(catdiff::weighted_example_from_json(json::parse(line)));
    }
    const catdiff::OracleDenoiser denoiser(model, oracle_entries(dataset), true,
                                           oracle_cap_from_env());
    tokens = catdiff::infer(model, denoiser, {a.cond}, a.length, a.stride, rng);
  } else {
    throw std::invalid_argument("infer: need --params or --data");
  }

  const json doc{{"seed", a.seed}, {"stride", a.stride}, {"T", a.T}, {"tokens", tokens}};
  atomic_write(a.out, doc.dump() + "\n");
  std::cout << doc.dump() << '\n';
  return 0;
}

int cmd_fid(const std::string& real_path, const std::string& fake_path, const std::string& out) {
  const auto real = catdiff::feature_set_from_csv(read_file(real_path));
  const auto fake = catdiff::feature_set_from_csv(read_file(fake_path));
  const double value = catdiff::fid(real, fake);
  const json doc = catdiff::score_json("fid", value, real.features.rows(), fake.features.rows());
  if (!out.empty()) atomic_write(out, doc.dump() + "\n");
  std::cout << doc.dump() << '\n';
  return 0;
}

int cmd_kl(const std::string& real_path, const std::string& fake_path, const std::string& out) {
  const auto real = catdiff::prob_set_from_csv(read_file(real_path));
  const auto fake = catdiff::prob_set_from_csv(read_file(fake_path));
  const double value = catdiff::kl_score(real, fake);
  const json doc = catdiff::score_json("kl", value, real.probs.rows(), fake.probs.rows());
  if (!out.empty()) atomic_write(out, doc.dump() + "\n");
  std::cout << doc.dump() << '\n';
  return 0;
}

int cmd_mbtg(const std::string& labels_csv, std::uint64_t seed) {
  std::vector<std::string> labels;
  std::istringstream in(labels_csv);
  std::string label;
  while (std::getline(in, label, ',')) labels.push_back(label);
  std::mt19937_64 rng(seed);
  const auto tokens = catdiff::mbtg(labels, rng);
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) text += ' ';
    text += tokens[i];
  }
  std::cout << json{{"command", "mbtg"}, {"seed", seed}, {"text", text}}.dump() << '\n';
  return 0;
}

int cmd_split(const std::string& in_path, const std::string& ses_out, const std::string& mes_out) {
  const auto records = catdiff::records_from_jsonl(read_file(in_path));
  const auto [ses, mes] = catdiff::curriculum_split(records);
  atomic_write(ses_out, catdiff::to_jsonl(ses));
  atomic_write(mes_out, catdiff::to_jsonl(mes));
  std::cout << json{{"command", "split"},
                    {"input", records.size()},
                    {"ses", ses.size()},
                    {"mes", mes.size()}}
                   .dump()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"categorical diffusion toolkit"};
  app.require_subcommand(1);

  DemoArgs demo;
  auto* demo_cmd = app.add_subcommand("demo", "write one forward and one reverse token trace");
  demo_cmd->add_option("--kind", demo.kind);
  demo_cmd->add_option("--K", demo.K);
  demo_cmd->add_option("--T", demo.T);
  demo_cmd->add_option("--length", demo.length);
  demo_cmd->add_option("--stride", demo.stride);
  demo_cmd->add_option("--gamma-bar-T", demo.gamma_bar_T);
  demo_cmd->add_option("--seed", demo.seed);
  demo_cmd->add_option("--out", demo.out);

  BenchmarkArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "stride-vs-speed sampling benchmark");
  bench_cmd->add_option("--T", bench.Ts);
  bench_cmd->add_option("--stride", bench.strides);
  bench_cmd->add_option("--samples", bench.samples);
  bench_cmd->add_option("--K", bench.K);
  bench_cmd->add_option("--length", bench.length);
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_option("--out", bench.out);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train the tabular denoiser");
  train_cmd->add_option("--kind", train.kind);
  train_cmd->add_option("--K", train.K);
  train_cmd->add_option("--T", train.T);
  train_cmd->add_option("--epochs", train.epochs);
  train_cmd->add_option("--lambda", train.lambda);
  train_cmd->add_option("--lr", train.lr);
  train_cmd->add_option("--gamma-bar-T", train.gamma_bar_T);
  train_cmd->add_option("--seed", train.seed);
  train_cmd->add_option("--data", train.data);
  train_cmd->add_option("--length", train.length);
  train_cmd->add_option("--num-conditions", train.num_conditions);
  train_cmd->add_option("--sequences", train.sequences);
  train_cmd->add_option("--params-out", train.params_out);
  train_cmd->add_option("--trace-out", train.trace_out);

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "reverse-process generation");
  infer_cmd->add_option("--kind", infer.kind);
  infer_cmd->add_option("--K", infer.K);
  infer_cmd->add_option("--T", infer.T);
  infer_cmd->add_option("--stride", infer.stride);
  infer_cmd->add_option("--length", infer.length);
  infer_cmd->add_option("--cond", infer.cond);
  infer_cmd->add_option("--gamma-bar-T", infer.gamma_bar_T);
  infer_cmd->add_option("--seed", infer.seed);
  infer_cmd->add_option("--params", infer.params);
  infer_cmd->add_option("--data", infer.data);
  infer_cmd->add_option("--out", infer.out);

  std::string fid_real, fid_fake, fid_out;
  auto* fid_cmd = app.add_subcommand("fid", "Frechet distance between two feature CSVs");
  fid_cmd->add_option("real", fid_real)->required();
  fid_cmd->add_option("fake", fid_fake)->required();
  fid_cmd->add_option("--out", fid_out);

  std::string kl_real, kl_fake, kl_out;
  auto* kl_cmd = app.add_subcommand("kl", "mean row KL between two probability CSVs");
  kl_cmd->add_option("real", kl_real)->required();
  kl_cmd->add_option("fake", kl_fake)->required();
  kl_cmd->add_option("--out", kl_out);

  std::string mbtg_labels;
  std::uint64_t mbtg_seed = 0;
  auto* mbtg_cmd = app.add_subcommand("mbtg", "mask-based text generation from labels");
  mbtg_cmd->add_option("--labels", mbtg_labels)->required();
  mbtg_cmd->add_option("--seed", mbtg_seed);

  std::string split_in, split_ses = "ses.jsonl", split_mes = "mes.jsonl";
  auto* split_cmd = app.add_subcommand("split", "curriculum split into SES and MES");
  split_cmd->add_option("--in", split_in)->required();
  split_cmd->add_option("--ses-out", split_ses);
  split_cmd->add_option("--mes-out", split_mes);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (demo_cmd->parsed()) return cmd_demo(demo);
    if (bench_cmd->parsed()) return cmd_benchmark(bench);
    if (train_cmd->parsed()) return cmd_train(train);
    if (infer_cmd->parsed()) return cmd_infer(infer);
    if (fid_cmd->parsed()) return cmd_fid(fid_real, fid_fake, fid_out);
    if (kl_cmd->parsed()) return cmd_kl(kl_real, kl_fake, kl_out);
    if (mbtg_cmd->parsed()) return cmd_mbtg(mbtg_labels, mbtg_seed);
    if (split_cmd->parsed()) return cmd_split(split_in, split_ses, split_mes);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
