#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tlab/error.hpp"
#include "tlab/parallel.hpp"
#include "tlab/random.hpp"
#include "tlab/scm.hpp"

namespace tlab::estimand {

// An input x decomposed into its causal part z and spurious part w.
struct FactoredSample {
  int z = 0;
  int w = 0;

  bool operator==(const FactoredSample&) const = default;
};

// Names of the decomposed-input graph: U -> W, W -> Z, Z -> Y, with W and Y
// free to share exogenous parents and Z's exogenous inputs private.
struct FactoredNames {
  std::string z = "Z";
  std::string w = "W";
  std::string y = "Y";
};

// Throws kStructure unless `scm` has exactly the endogenous variables
// {Z, W, Y} wired as above.
void check_factored_structure(const scm::DiscreteScm& scm, const FactoredNames& names = {});

struct FactoredSizes {
  int z = 2;
  int w = 2;
  int y = 2;
};

// Random SCM on the decomposed-input graph. W and Y share a confounder.
scm::DiscreteScm random_factored_scm(std::uint64_t seed, const FactoredSizes& sizes);
// Sizes drawn uniformly: |Z|, |Y| in [2, max], |W| in [1, max].
scm::DiscreteScm random_factored_scm(std::uint64_t seed, int max_domain = 4);

// P̂(R | X) over a finite representation space.
class RepresentationModel {
 public:
  virtual ~RepresentationModel() = default;
  virtual int num_values() const = 0;
  virtual double prob(int r, FactoredSample x) const = 0;
  virtual int sample(FactoredSample x, Rng& rng) const = 0;
};

// P̂(Y | R = r, X = x′).
class ReadoutModel {
 public:
  virtual ~ReadoutModel() = default;
  virtual int num_labels() const = 0;
  virtual std::vector<double> predict(int r, FactoredSample x_prime) const = 0;
};

// r = z. Sufficient for Z by construction.
class OracleRepresentation final : public RepresentationModel {
 public:
  explicit OracleRepresentation(int z_size) : z_size_(z_size) {}
  int num_values() const override { return z_size_; }
  double prob(int r, FactoredSample x) const override { return r == x.z ? 1.0 : 0.0; }
  int sample(FactoredSample x, Rng&) const override { return x.z; }

 private:
  int z_size_;
};

// Returns the true labeling probability P(y | z = r, w′), tabulated from the SCM.
class OracleReadout final : public ReadoutModel {
 public:
  OracleReadout(int z_size, int w_size, int y_size, std::vector<double> table)
      : z_size_(z_size), w_size_(w_size), y_size_(y_size), table_(std::move(table)) {}
  int num_labels() const override { return y_size_; }
  std::vector<double> predict(int r, FactoredSample x_prime) const override;

 private:
  int z_size_;
  int w_size_;
  int y_size_;
  std::vector<double> table_;  // [z][w][y]
};

struct OracleModels {
  OracleRepresentation representation;
  OracleReadout readout;
};

OracleModels oracle_models_from_scm(const scm::DiscreteScm& scm, const FactoredNames& names = {});

// P(y | do(Z=z), W=w) by enumerating the mechanisms with Z forced. Equal to
// the observational P(y | z, w) wherever (z, w) has mass, and defined for
// every (z, w) with P(W=w) > 0. Falls back to P(y | do(Z=z)) when P(W=w) = 0.
std::vector<double> structural_conditional(const scm::DiscreteScm& scm, int z, int w,
                                           const FactoredNames& names = {});

enum class EstimateMode { kExact, kMonteCarlo };

const char* estimate_mode_name(EstimateMode mode);

struct DoEstimate {
  std::vector<double> dist;
  EstimateMode mode = EstimateMode::kExact;
  std::size_t n_i = 0;
  std::size_t n_j = 0;
  std::uint64_t seed = 0;
};

// Full double sum Σ_r P̂(r|x) Σ_x′ P̂(y|r,x′) P(x′). `x_prior` is a table over
// (Z, W) in that order.
DoEstimate exact_do_theorem1(const RepresentationModel& rep, const ReadoutModel& readout, FactoredSample x,
                             const scm::DistTable& x_prior);

// Σ_w′ P(y | z, w′) P(w′), observational conditionals where (z, w′) has mass
// and the structural conditional elsewhere.
scm::DistTable backdoor_adjustment(const scm::DiscreteScm& scm, int z, const FactoredNames& names = {});

// Σ_{z′,w′} P(y | z, w′) P(z′, w′).
scm::DistTable marginalized_adjustment(const scm::DiscreteScm& scm, int z, const FactoredNames& names = {});

enum class PoolSampling {
  // x′_ij drawn uniformly with replacement.
  kRandom,
  // x′_ij = pool[j mod |pool|]; exact pool average when |pool| divides n_j.
  kExhaustive,
};

struct MonteCarloOptions {
  std::size_t n_i = 10;
  std::size_t n_j = 256;
  std::uint64_t seed = 0;
  PoolSampling sampling = PoolSampling::kRandom;
  unsigned threads = 1;
};

// Index of the pool element used as x′_ij. Draws for a given (seed, i, j) do
// not depend on n_i or n_j, so estimates at growing n_j share a prefix.
inline std::size_t pool_draw(const MonteCarloOptions& options, std::size_t i, std::size_t j, std::size_t pool_size) {
  if (options.sampling == PoolSampling::kExhaustive) return j % pool_size;
  return bounded(derive_seed(options.seed, {0x9001, i, j}), pool_size);
}

inline std::uint64_t representation_seed(const MonteCarloOptions& options, std::size_t i) {
  return derive_seed(options.seed, {0x7e9, i});
}

// Monte-Carlo evaluation of the estimand for a single query.
//
// `sample_rep(Rng&) -> R` draws r ~ P̂(r|x). `readout(const R&, span<const
// size_t> pool_indices, span<double> out)` writes P̂(y | r, pool[idx]) for
// each index into consecutive rows of `out` (n_j x num_labels). Every draw
// carries weight 1/(n_i n_j). Partial sums are combined in index order, so
// the result does not depend on `threads`.
template <typename SampleRep, typename ReadoutBatch>
DoEstimate mc_do_estimate(SampleRep&& sample_rep, ReadoutBatch&& readout, std::size_t pool_size,
                          std::size_t num_labels, const MonteCarloOptions& options) {
  if (options.n_i < 1 || options.n_j < 1)
    throw Error(ErrorCode::kInvalidArgument, "n_i and n_j must be >= 1");
  if (pool_size == 0) throw Error(ErrorCode::kPool, "x′ pool is empty");
  if (num_labels == 0) throw Error(ErrorCode::kInvalidArgument, "no labels");

  std::vector<std::vector<double>> partial(options.n_i, std::vector<double>(num_labels, 0.0));
  auto run_i = [&](std::size_t i) {
    Rng rng(representation_seed(options, i));
    const auto r = sample_rep(rng);
    std::vector<std::size_t> idx(options.n_j);
    for (std::size_t j = 0; j < options.n_j; ++j) idx[j] = pool_draw(options, i, j, pool_size);
    std::vector<double> out(options.n_j * num_labels);
    readout(r, std::span<const std::size_t>(idx), std::span<double>(out));
    for (std::size_t j = 0; j < options.n_j; ++j)
      for (std::size_t y = 0; y < num_labels; ++y) partial[i][y] += out[j * num_labels + y];
  };
  parallel_for(options.n_i, options.threads, run_i);

  DoEstimate est;
  est.mode = EstimateMode::kMonteCarlo;
  est.n_i = options.n_i;
  est.n_j = options.n_j;
  est.seed = options.seed;
  est.dist.assign(num_labels, 0.0);
  for (std::size_t i = 0; i < options.n_i; ++i)
    for (std::size_t y = 0; y < num_labels; ++y) est.dist[y] += partial[i][y];
  const double weight = 1.0 / (static_cast<double>(options.n_i) * static_cast<double>(options.n_j));
  double total = 0.0;
  for (double& p : est.dist) total += (p *= weight);
  if (!(total > 0.0)) throw Error(ErrorCode::kNumeric, "readout produced no probability mass");
  for (double& p : est.dist) p /= total;
  return est;
}

// Discrete convenience form over a pool of decomposed samples.
DoEstimate mc_do_estimate(const RepresentationModel& rep, const ReadoutModel& readout, FactoredSample x,
                          std::span<const FactoredSample> pool, const MonteCarloOptions& options);

// Label with maximal probability; ties go to the lowest index.
int argmax_lowest(std::span<const double> values);
inline int predict_class(const DoEstimate& est) { return argmax_lowest(est.dist); }

void write_estimate_csv_header(std::ostream& out, std::size_t num_labels);
void write_estimate_csv_row(std::ostream& out, const std::string& query_id, const DoEstimate& est);

}  // namespace tlab::estimand
