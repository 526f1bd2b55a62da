#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tlab/tlab.h"

namespace {

struct Options {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out;
  unsigned threads = 0;
  std::string method;
};

int report_error(tlab_status s) {
  std::fprintf(stderr, "error [%s]: %s\n", tlab_status_name(s), tlab_last_error());
  return static_cast<int>(s);
}

// Loads --config, or the built-in defaults for `kind`, then applies the flags.
tlab_status make_config(const Options& o, const char* kind, tlab_config** out) {
  tlab_status s = o.config.empty() ? tlab_config_default(kind, out) : tlab_config_load(o.config.c_str(), out);
  if (s != TLAB_OK) return s;
  if (!o.seeds.empty() && (s = tlab_config_set_seeds(*out, o.seeds.data(), o.seeds.size())) != TLAB_OK) return s;
  if (o.threads && (s = tlab_config_set_threads(*out, o.threads)) != TLAB_OK) return s;
  if (!o.method.empty() && (s = tlab_config_set_methods(*out, o.method.c_str())) != TLAB_OK) return s;
  return TLAB_OK;
}

std::string pct(double v) {
  if (std::isnan(v)) return "   -  ";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}

int verify(const Options& o, const char* kind, bool props) {
  tlab_config* cfg = nullptr;
  tlab_status s = make_config(o, kind, &cfg);
  if (s != TLAB_OK) return report_error(s);
  tlab_checks* checks = nullptr;
  const char* dir = o.out.empty() ? nullptr : o.out.c_str();
  s = props ? tlab_verify_props(cfg, dir, &checks) : tlab_verify_theorem(cfg, dir, &checks);
  tlab_config_free(cfg);
  if (s != TLAB_OK) return report_error(s);
  for (size_t i = 0; i < tlab_checks_count(checks); ++i) {
    tlab_check c;
    tlab_checks_get(checks, i, &c);
    std::printf("%-4s %-40s %-14.6g %s%s%s\n", c.pass ? "PASS" : "FAIL", c.name, c.value, c.criterion,
                *c.detail ? "  " : "", c.detail);
  }
  const bool ok = tlab_checks_all_pass(checks);
  tlab_checks_free(checks);
  if (dir) std::printf("report written to %s\n", dir);
  return ok ? 0 : TLAB_VERIFICATION;
}

int run(const Options& o) {
  tlab_config* cfg = nullptr;
  tlab_status s = make_config(o, "cmnist", &cfg);
  if (s != TLAB_OK) return report_error(s);
  tlab_metrics* m = nullptr;
  s = tlab_run(cfg, o.out.empty() ? nullptr : o.out.c_str(), &m);
  tlab_config_free(cfg);
  if (s != TLAB_OK) return report_error(s);
  std::printf("%-6s %-9s %7s %7s %7s %7s\n", "seed", "method", "train", "test", "ood", "worst");
  size_t failures = 0;
  for (size_t i = 0; i < tlab_metrics_count(m); ++i) {
    tlab_metric_row r;
    tlab_metrics_get(m, i, &r);
    if (*r.error) {
      ++failures;
      std::printf("%-6llu %-9s failed: %s\n", static_cast<unsigned long long>(r.seed), r.method, r.error);
      continue;
    }
    std::printf("%-6llu %-9s %s  %s  %s  %s\n", static_cast<unsigned long long>(r.seed), r.method,
                pct(r.train_accuracy).c_str(), pct(r.test_accuracy).c_str(), pct(r.ood_accuracy).c_str(),
                pct(r.worst_group_ood).c_str());
  }
  const size_t rows = tlab_metrics_count(m);
  tlab_metrics_free(m);
  if (!o.out.empty()) std::printf("results written to %s\n", o.out.c_str());
  if (failures == rows) {
    std::fprintf(stderr, "error: every seed failed\n");
    return TLAB_INTERNAL;
  }
  return 0;
}

int sweep(const Options& o) {
  tlab_config* cfg = nullptr;
  tlab_status s = make_config(o, "sweep-nj", &cfg);
  if (s != TLAB_OK) return report_error(s);
  tlab_sweep* sw = nullptr;
  s = tlab_sweep_nj(cfg, o.out.empty() ? nullptr : o.out.c_str(), &sw);
  tlab_config_free(cfg);
  if (s != TLAB_OK) return report_error(s);
  std::printf("%6s %8s %8s %8s\n", "n_j", "median", "min", "max");
  for (size_t i = 0; i < tlab_sweep_count(sw); ++i) {
    tlab_sweep_row r;
    tlab_sweep_get(sw, i, &r);
    std::printf("%6zu %s   %s   %s\n", r.n_j, pct(r.median).c_str(), pct(r.min).c_str(), pct(r.max).c_str());
  }
  const size_t failed = tlab_sweep_failures(sw);
  tlab_sweep_free(sw);
  if (failed) std::fprintf(stderr, "warning: %zu seed(s) failed; see sweep.md\n", failed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal transportability lab: exact SCM checks and representation-based experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tlab_version());
  Options o;

  auto add_common = [&](CLI::App* sub, bool experiment) {
    sub->add_option("--config", o.config, "Config file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seeds, "Seed; repeat for several (overrides the config)")->take_all();
    sub->add_option("--threads", o.threads, "Worker threads across seeds")->check(CLI::PositiveNumber);
    if (experiment)
      sub->add_option("--method", o.method, "Method subset")->check(CLI::IsMember({"erm", "ablation", "ours", "all"}));
  };

  auto* props = app.add_subcommand("verify-props", "Check the transportability propositions exactly");
  add_common(props, false);
  auto* theorem = app.add_subcommand("verify-theorem", "Check the representation estimand on random SCMs");
  add_common(theorem, false);
  auto* run_cmd = app.add_subcommand("run", "Train and evaluate ERM, Ablation and Ours");
  add_common(run_cmd, true);
  auto* sweep_cmd = app.add_subcommand("sweep-nj", "OOD accuracy at several n_j with models trained once per seed");
  add_common(sweep_cmd, false);
  auto* report = app.add_subcommand("report", "Rebuild summary.md from metrics.csv");
  report->add_option("--out", o.out, "Result directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : TLAB_INVALID_ARGUMENT;
  }

  if (*props) return verify(o, "verify-props", true);
  if (*theorem) return verify(o, "verify-theorem", false);
  if (*run_cmd) return run(o);
  if (*sweep_cmd) return sweep(o);
  const tlab_status s = tlab_report_rebuild(o.out.c_str());
  if (s != TLAB_OK) return report_error(s);
  std::printf("rebuilt %s/summary.md\n", o.out.c_str());
  return 0;
}
