#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "tlab/estimand.hpp"
#include "tlab/mlp.hpp"
#include "tlab/vae.hpp"

namespace tlab::neural {

struct ImageShape {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 3;

  std::size_t size() const { return height * width * channels; }
  bool operator==(const ImageShape&) const = default;
};

struct PatchBag {
  // n_patches x (patch_size^2 * channels), each patch flattened row-major.
  Tensor patches;
  // (row, column) of each patch's top-left corner.
  std::vector<std::pair<std::size_t, std::size_t>> offsets;
};

// Square patches at seeded uniform offsets. Throws kShape when the patch does
// not fit the image.
PatchBag patch_bag(std::span<const double> image, const ImageShape& shape, std::size_t patch_size,
                   std::size_t n_patches, std::uint64_t seed);

// Frozen random per-patch projection, ReLU, and mean pooling over the bag.
class PatchBagEncoder {
 public:
  PatchBagEncoder() = default;
  PatchBagEncoder(const ImageShape& shape, std::size_t patch_size, std::size_t n_patches, std::size_t embed_dim,
                  std::uint64_t seed);

  std::size_t output_dim() const { return projection_.out(); }
  std::size_t patch_size() const { return patch_size_; }
  std::size_t n_patches() const { return n_patches_; }
  const DenseLayer& projection() const { return projection_; }

  std::vector<double> pool(const Tensor& patches) const;
  std::vector<double> encode(std::span<const double> image, std::uint64_t bag_seed) const;
  // One bag per row, seeded by (seed, row).
  Tensor encode_all(const Tensor& images, std::uint64_t seed) const;

 private:
  ImageShape shape_;
  std::size_t patch_size_ = 0;
  std::size_t n_patches_ = 0;
  DenseLayer projection_;
};

// Per-sample representation parameters for a fixed list of inputs:
// r ~ N(mean, exp(logvar)), or r = mean when `logvar` is empty.
struct RepresentationTable {
  Tensor mean;
  Tensor logvar;

  std::size_t rows() const { return mean.rows(); }
  std::size_t dim() const { return mean.cols(); }
  bool stochastic() const { return !logvar.empty(); }
  void sample(std::size_t row, Rng& rng, std::span<double> out) const;
};

RepresentationTable vae_representation(const VaeModel& vae, const Tensor& images);
// r ~ N(0, I) regardless of the input.
RepresentationTable noise_representation(std::size_t rows, std::size_t dim);
RepresentationTable zero_representation(std::size_t rows, std::size_t dim);
// Externally computed features, one row per sample.
RepresentationTable supplied_representation(Tensor features);
// CSV without header, one row of comma-separated numbers per sample.
RepresentationTable load_feature_table(const std::filesystem::path& path);

// How x′ is paired with (x, y) while training the readout.
enum class ReadoutPairing {
  kSameCategory,  // x′ drawn uniformly from the class of y
  kSameInstance,  // x′ = x
};

// How x′ is drawn at evaluation time.
enum class InferencePairing {
  kRandom,        // uniform over the pool
  kSameCategory,  // uniform over the query's true class; diagnostic only
};

const char* readout_pairing_name(ReadoutPairing p);
const char* inference_pairing_name(InferencePairing p);

struct ReadoutConfig {
  TrainConfig train{0.05, 64, 40, 0, 0.9, 0.0};
  std::size_t hidden = 64;
  // Epochs with r zeroed before the main phase.
  std::size_t warmup_epochs = 30;
  ReadoutPairing pairing = ReadoutPairing::kSameInstance;
  // Upper bound on readout parameters.
  std::size_t parameter_budget = 50000;
};

// P̂(Y | X′, R): an MLP over [bag(x′), r].
class ReadoutNet {
 public:
  ReadoutNet() = default;
  ReadoutNet(Mlp net, std::size_t bag_dim, std::size_t rep_dim);

  const Mlp& net() const { return net_; }
  std::size_t bag_dim() const { return bag_dim_; }
  std::size_t rep_dim() const { return rep_dim_; }
  std::size_t num_classes() const { return net_.output_dim(); }

 private:
  Mlp net_;
  std::size_t bag_dim_ = 0;
  std::size_t rep_dim_ = 0;
};

// Readout training: warmup with r zeroed, then joint. `bags` are bag encodings of the pool, `reps` the
// representation of each pool element. Throws kClassCoverage when a class in
// [0, num_classes) has no sample, kInvalidArgument when the network exceeds
// the parameter budget.
ReadoutNet train_readout(const Tensor& bags, std::span<const int> labels, std::size_t num_classes,
                         const RepresentationTable& reps, const ReadoutConfig& config,
                         std::vector<EpochLog>* log = nullptr, const std::function<double()>& val_accuracy = {});

// Plain classifier on raw inputs with the given hidden widths.
Mlp train_erm(const Tensor& inputs, std::span<const int> labels, std::size_t num_classes,
              const std::vector<std::size_t>& hidden, const TrainConfig& config,
              std::vector<EpochLog>* log = nullptr, const std::function<double()>& val_accuracy = {});

struct SamplingOptions {
  std::size_t n_i = 10;
  std::size_t n_j = 256;
  std::uint64_t seed = 0;
  InferencePairing pairing = InferencePairing::kRandom;
  unsigned threads = 1;
};

// Monte Carlo do-prediction over a fixed x′ pool. The first readout layer is split into
// its bag and representation blocks so the pool term is computed once.
class CausalPredictor {
 public:
  CausalPredictor(const ReadoutNet& readout, const Tensor& pool_bags, std::vector<int> pool_labels);

  // P(y | do(x)) for row `row` of `reps`. `label` is only read for
  // same-category inference.
  estimand::DoEstimate estimate(const RepresentationTable& reps, std::size_t row, const SamplingOptions& options,
                                int label = -1) const;
  std::vector<int> predict(const RepresentationTable& reps, const SamplingOptions& options,
                           std::span<const int> labels = {}) const;

 private:
  std::size_t rep_dim_;
  std::size_t hidden_;
  Tensor rep_weight_;  // rep_dim x hidden
  Tensor bias_;
  Activation activation_;
  Mlp tail_;
  Tensor pool_terms_;  // pool x hidden
  std::vector<int> pool_labels_;
  std::vector<std::vector<std::size_t>> by_class_;
};

}  // namespace tlab::neural
