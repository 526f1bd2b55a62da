#include "tlab/tlab.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "tlab/error.hpp"
#include "tlab/harness.hpp"
#include "tlab/scm.hpp"
#include "tlab/scm_io.hpp"

struct tlab_config {
  tlab::harness::ExperimentConfig config;
};

struct tlab_checks {
  tlab::harness::CheckReport report;
};

struct tlab_metrics {
  tlab::harness::MetricsRecord record;
};

struct tlab_sweep {
  tlab::harness::SweepResult result;
};

struct tlab_scm {
  tlab::scm::DiscreteScm scm;
};

namespace {

thread_local std::string last_error;

tlab_status fail(tlab_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename Fn>
tlab_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return TLAB_OK;
  } catch (const tlab::Error& e) {
    return fail(static_cast<tlab_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(TLAB_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TLAB_INTERNAL, e.what());
  } catch (...) {
    return fail(TLAB_INTERNAL, "unknown exception");
  }
}

tlab_status null_arg(const char* what) { return fail(TLAB_INVALID_ARGUMENT, std::string(what) + " is null"); }

std::filesystem::path dir_or_empty(const char* dir) { return dir ? std::filesystem::path(dir) : std::filesystem::path(); }

}  // namespace

extern "C" {

const char* tlab_version(void) { return "1.0.0"; }

const char* tlab_status_name(tlab_status status) { return tlab::error_code_name(static_cast<tlab::ErrorCode>(status)); }

const char* tlab_last_error(void) { return last_error.c_str(); }

tlab_status tlab_config_default(const char* kind, tlab_config** out) {
  if (!kind) return null_arg("kind");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto c = tlab::harness::parse_config(std::string("kind = ") + kind);
    *out = new tlab_config{std::move(c)};
  });
}

tlab_status tlab_config_parse(const char* text, tlab_config** out) {
  if (!text) return null_arg("text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new tlab_config{tlab::harness::parse_config(text)}; });
}

tlab_status tlab_config_load(const char* path, tlab_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new tlab_config{tlab::harness::load_config(path)}; });
}

void tlab_config_free(tlab_config* config) { delete config; }

tlab_status tlab_config_kind(const tlab_config* config, const char** kind) {
  if (!config) return null_arg("config");
  if (!kind) return null_arg("kind");
  *kind = tlab::harness::experiment_kind_name(config->config.kind);
  last_error.clear();
  return TLAB_OK;
}

tlab_status tlab_config_set_seeds(tlab_config* config, const uint64_t* seeds, size_t count) {
  if (!config) return null_arg("config");
  if (!seeds || count == 0) return fail(TLAB_CONFIG, "at least one seed is required");
  config->config.seeds.assign(seeds, seeds + count);
  last_error.clear();
  return TLAB_OK;
}

tlab_status tlab_config_set_threads(tlab_config* config, unsigned threads) {
  if (!config) return null_arg("config");
  if (threads == 0) return fail(TLAB_CONFIG, "threads must be >= 1");
  config->config.threads = threads;
  last_error.clear();
  return TLAB_OK;
}

tlab_status tlab_config_set_methods(tlab_config* config, const char* methods) {
  if (!config) return null_arg("config");
  if (!methods) return null_arg("methods");
  return guarded([&] {
    const std::string text = "kind = " + std::string(tlab::harness::experiment_kind_name(config->config.kind)) +
                             "\nmethods = " + methods + "\n";
    config->config.methods = tlab::harness::parse_config(text).methods;
  });
}

tlab_status tlab_config_echo(const tlab_config* config, char* buf, size_t cap, size_t* needed) {
  if (!config) return null_arg("config");
  return guarded([&] {
    const std::string echo = config->config.echo();
    if (needed) *needed = echo.size() + 1;
    if (!buf || cap < echo.size() + 1) throw tlab::Error(tlab::ErrorCode::kInvalidArgument, "buffer too small");
    std::memcpy(buf, echo.c_str(), echo.size() + 1);
  });
}

tlab_status tlab_config_hash(const tlab_config* config, uint64_t* hash) {
  if (!config) return null_arg("config");
  if (!hash) return null_arg("hash");
  *hash = config->config.hash();
  last_error.clear();
  return TLAB_OK;
}

tlab_status tlab_verify_props(const tlab_config* config, const char* out_dir, tlab_checks** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    *out = new tlab_checks{tlab::harness::verify_propositions(config->config, dir_or_empty(out_dir))};
  });
}

tlab_status tlab_verify_theorem(const tlab_config* config, const char* out_dir, tlab_checks** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new tlab_checks{tlab::harness::verify_theorem(config->config, dir_or_empty(out_dir))}; });
}

size_t tlab_checks_count(const tlab_checks* checks) { return checks ? checks->report.checks.size() : 0; }

tlab_status tlab_checks_get(const tlab_checks* checks, size_t index, tlab_check* out) {
  if (!checks) return null_arg("checks");
  if (!out) return null_arg("out");
  if (index >= checks->report.checks.size()) return fail(TLAB_INVALID_ARGUMENT, "check index out of range");
  const auto& c = checks->report.checks[index];
  *out = {c.name.c_str(), c.value, c.criterion.c_str(), c.pass ? 1 : 0, c.detail.c_str()};
  last_error.clear();
  return TLAB_OK;
}

int tlab_checks_all_pass(const tlab_checks* checks) { return checks && checks->report.all_pass() ? 1 : 0; }

void tlab_checks_free(tlab_checks* checks) { delete checks; }

tlab_status tlab_run(const tlab_config* config, const char* out_dir, tlab_metrics** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto record = tlab::harness::run_experiment(config->config);
    if (out_dir) tlab::harness::emit_report(record, config->config, out_dir);
    *out = new tlab_metrics{std::move(record)};
  });
}

size_t tlab_metrics_count(const tlab_metrics* metrics) { return metrics ? metrics->record.rows.size() : 0; }

tlab_status tlab_metrics_get(const tlab_metrics* metrics, size_t index, tlab_metric_row* out) {
  if (!metrics) return null_arg("metrics");
  if (!out) return null_arg("out");
  if (index >= metrics->record.rows.size()) return fail(TLAB_INVALID_ARGUMENT, "row index out of range");
  const auto& r = metrics->record.rows[index];
  *out = {r.seed,          tlab::harness::method_name(r.method), r.train_accuracy, r.test_accuracy,
          r.ood_accuracy, r.worst_group_ood,                     r.error.c_str()};
  last_error.clear();
  return TLAB_OK;
}

void tlab_metrics_free(tlab_metrics* metrics) { delete metrics; }

tlab_status tlab_sweep_nj(const tlab_config* config, const char* out_dir, tlab_sweep** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto result = tlab::harness::sweep_nj(config->config);
    if (out_dir) tlab::harness::emit_sweep(result, config->config, out_dir);
    *out = new tlab_sweep{std::move(result)};
  });
}

size_t tlab_sweep_count(const tlab_sweep* sweep) { return sweep ? sweep->result.rows.size() : 0; }

tlab_status tlab_sweep_get(const tlab_sweep* sweep, size_t index, tlab_sweep_row* out) {
  if (!sweep) return null_arg("sweep");
  if (!out) return null_arg("out");
  if (index >= sweep->result.rows.size()) return fail(TLAB_INVALID_ARGUMENT, "row index out of range");
  const auto& r = sweep->result.rows[index];
  *out = {r.n_j, r.median, r.min, r.max};
  last_error.clear();
  return TLAB_OK;
}

size_t tlab_sweep_failures(const tlab_sweep* sweep) { return sweep ? sweep->result.errors.size() : 0; }

void tlab_sweep_free(tlab_sweep* sweep) { delete sweep; }

tlab_status tlab_report_rebuild(const char* dir) {
  if (!dir) return null_arg("dir");
  return guarded([&] { tlab::harness::rebuild_summary(dir); });
}

tlab_status tlab_scm_load(const char* path, tlab_scm** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new tlab_scm{tlab::scm::load_scm(path)}; });
}

tlab_status tlab_scm_parse(const char* text, tlab_scm** out) {
  if (!text) return null_arg("text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new tlab_scm{tlab::scm::parse_scm(text)}; });
}

void tlab_scm_free(tlab_scm* scm) { delete scm; }

tlab_status tlab_scm_query(const tlab_scm* scm, const char* target, const char* const* do_vars,
                           const int* do_values, size_t n_do, double* probs, size_t cap, size_t* written) {
  if (!scm) return null_arg("scm");
  if (!target) return null_arg("target");
  if (n_do > 0 && (!do_vars || !do_values)) return null_arg("do_vars");
  return guarded([&] {
    tlab::scm::Assignment assignment;
    for (size_t k = 0; k < n_do; ++k) {
      if (!do_vars[k]) throw tlab::Error(tlab::ErrorCode::kInvalidArgument, "do variable name is null");
      assignment.emplace_back(do_vars[k], do_values[k]);
    }
    const auto table = n_do ? tlab::scm::interventional_distribution(scm->scm, assignment, target)
                            : tlab::scm::joint_distribution(scm->scm, {target});
    if (written) *written = table.size();
    if (!probs || cap < table.size()) throw tlab::Error(tlab::ErrorCode::kInvalidArgument, "probability buffer too small");
    std::memcpy(probs, table.probs().data(), table.size() * sizeof(double));
  });
}

}  // extern "C"
