#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tlab/datasets.hpp"
#include "tlab/readout.hpp"
#include "tlab/transport.hpp"
#include "tlab/vae.hpp"

namespace tlab::harness {

enum class ExperimentKind { kVerifyProps, kVerifyTheorem, kCmnist, kWaterbird, kSweepNj };
enum class Method { kErm, kAblation, kOurs };
enum class RepresentationKind { kVae, kNoise, kZero, kFeatures };

const char* experiment_kind_name(ExperimentKind kind);
const char* method_name(Method method);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kCmnist;
  datasets::DatasetSpec dataset;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<Method> methods{Method::kErm, Method::kAblation, Method::kOurs};
  unsigned threads = 1;

  // ERM optimizer settings.
  neural::TrainConfig train{0.05, 64, 20, 0, 0.9, 0.0};
  std::vector<std::size_t> erm_hidden{64, 64};

  RepresentationKind representation = RepresentationKind::kVae;
  // Directory with train.csv, val.csv, test.csv, ood.csv feature tables.
  std::string features_dir;
  neural::VaeConfig vae;
  neural::ReadoutConfig readout;
  std::size_t bag_patch = 4;
  std::size_t bag_count = 8;
  std::size_t bag_dim = 32;

  std::size_t n_i = 10;
  std::size_t n_j = 256;
  neural::InferencePairing inference_pairing = neural::InferencePairing::kRandom;
  // Train accuracy is measured on this many leading training samples.
  std::size_t train_eval_limit = 1000;

  std::vector<std::size_t> sweep_nj{1, 4, 16, 64};
  std::size_t sweep_ni = 10;

  std::size_t props_random_pairs = 200;
  std::uint64_t witness_budget = 100000;
  std::uint64_t witness_seed = 1;

  std::size_t theorem_random_scms = 200;
  int theorem_max_domain = 4;

  // Throws kConfig.
  void validate() const;
  // Canonical key = value dump of every effective setting, one per line.
  std::string echo() const;
  std::uint64_t hash() const;
};

ExperimentConfig default_config(ExperimentKind kind);
// Line-oriented `key = value`; '#' starts a comment. Throws kConfig with the
// line number on unknown keys or bad values.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct MethodMetrics {
  std::uint64_t seed = 0;
  Method method = Method::kErm;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double ood_accuracy = 0.0;
  // NaN when the dataset has no groups.
  double worst_group_ood = 0.0;
  // Non-empty when this seed failed; metrics are NaN then.
  std::string error;
};

struct Aggregate {
  Method method = Method::kErm;
  double median = 0.0, min = 0.0, max = 0.0;
};

struct TimingRow {
  std::uint64_t seed = 0;
  std::string phase;
  double seconds = 0.0;
};

struct MetricsRecord {
  std::string experiment;
  std::uint64_t config_hash = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<MethodMetrics> rows;
  std::vector<TimingRow> timing;

  // Median, min and max of one metric over seeds, failed seeds excluded.
  std::vector<double> values(Method method, double MethodMetrics::* field) const;
};

MetricsRecord run_experiment(const ExperimentConfig& config);

struct SweepRow {
  std::size_t n_j = 0;
  std::vector<double> per_seed;
  double median = 0.0, min = 0.0, max = 0.0;
};

struct SweepResult {
  std::uint64_t config_hash = 0;
  std::vector<std::uint64_t> seeds;
  std::size_t n_i = 0;
  std::vector<SweepRow> rows;
  std::vector<std::string> errors;
  std::vector<TimingRow> timing;
};

// Trains once per seed and evaluates OOD accuracy at every n_j.
SweepResult sweep_nj(const ExperimentConfig& config);

struct Check {
  std::string name;
  double value = 0.0;
  std::string criterion;
  bool pass = false;
  std::string detail;
};

struct CheckReport {
  std::string title;
  std::vector<Check> checks;
  bool all_pass() const;
};

// Transport and identifiability suites. When `out_dir` is non-empty, writes report.md,
// propositions.csv and the witness SCM files there.
CheckReport verify_propositions(const ExperimentConfig& config, const std::filesystem::path& out_dir = {});
CheckReport verify_theorem(const ExperimentConfig& config, const std::filesystem::path& out_dir = {});

// metrics.csv, aggregate.csv, summary.md and timing.csv. Throws kIo.
void emit_report(const MetricsRecord& record, const ExperimentConfig& config, const std::filesystem::path& out_dir);
// sweep.csv and sweep.md.
void emit_sweep(const SweepResult& sweep, const ExperimentConfig& config, const std::filesystem::path& out_dir);
// Rebuilds summary.md from an existing metrics.csv.
void rebuild_summary(const std::filesystem::path& out_dir);

std::string format_metrics_csv(const MetricsRecord& record);
MetricsRecord parse_metrics_csv(std::string_view text);

double median(std::vector<double> values);

}  // namespace tlab::harness
