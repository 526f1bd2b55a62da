#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlab/tensor.hpp"

namespace tlab::neural {

enum class Activation { kIdentity = 0, kRelu = 1, kSigmoid = 2, kTanh = 3 };

const char* activation_name(Activation a);

// y = act(x W + b), W stored in x out.
struct DenseLayer {
  Tensor weight;
  Tensor bias;
  Activation activation = Activation::kIdentity;

  std::size_t in() const { return weight.shape()[0]; }
  std::size_t out() const { return weight.shape()[1]; }
  bool operator==(const DenseLayer&) const = default;
};

struct Gradients {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;

  void zero();
  void scale(double factor);
  void add(const Gradients& other);
};

class Mlp {
 public:
  Mlp() = default;
  // widths = {input, hidden..., output}. Hidden layers use `hidden`, the last
  // layer `output`. Weights are uniform in ±1/sqrt(fan_in), biases zero.
  Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output, std::uint64_t seed);
  explicit Mlp(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::size_t input_dim() const { return layers_.front().in(); }
  std::size_t output_dim() const { return layers_.back().out(); }
  std::vector<std::size_t> widths() const;
  std::size_t parameter_count() const;

  // Post-activation outputs of every layer; activations[0] is the input.
  struct Cache {
    std::vector<Tensor> activations;
  };

  Tensor forward(const Tensor& x) const;
  Tensor forward(const Tensor& x, Cache& cache) const;
  // Accumulates parameter gradients given dL/d(final output). When
  // `grad_input` is non-null it receives dL/d(input).
  void backward(const Cache& cache, const Tensor& grad_out, Gradients& grads, Tensor* grad_input = nullptr) const;

  Gradients zero_gradients() const;

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

// Row-wise softmax; rows sum to 1.
Tensor softmax(const Tensor& logits);
void softmax_inplace(std::span<double> row);

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
  // Number of rows whose argmax matched the target.
  std::size_t correct = 0;
};

// Mean softmax cross-entropy over the batch and its exact gradients. Throws
// kShape for mismatched inputs or targets out of range and kNumeric for
// non-finite activations.
LossAndGradients forward_backward(const Mlp& model, const Tensor& batch, std::span<const int> targets);

// Worst entrywise relative error between the analytic gradients of the
// cross-entropy loss and central differences of it. Relative error is
// |a - n| / max(|a|, |n|), taken as 0 when both are below 1e-10. The
// differenced loss is evaluated in long double. `tamper` may modify the
// analytic gradients first. With `max_per_tensor` > 0, only that many evenly
// spaced entries of each parameter tensor are probed.
double grad_check(const Mlp& model, const Tensor& input, std::span<const int> targets, double eps,
                  const std::function<void(Gradients&)>& tamper = {}, std::size_t max_per_tensor = 0);

// Shared finite-difference loop: perturbs entries of each parameter tensor in
// place and compares against the paired analytic gradient. `loss` receives
// the tensor index and the perturbed entry.
double compare_gradients(const std::vector<std::pair<Tensor*, const Tensor*>>& params,
                         const std::function<long double(std::size_t, std::size_t)>& loss, double eps,
                         std::size_t max_per_tensor);

// Row-major forward pass in long double, for finite-difference references.
std::vector<long double> reference_forward(const Mlp& model, const Tensor& x);
std::vector<long double> reference_forward(const Mlp& model, std::vector<long double> x, std::size_t rows);

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double momentum = 0.9;
  double weight_decay = 0.0;

  // Throws kInvalidArgument.
  void validate() const;
};

class Sgd {
 public:
  Sgd(const Mlp& model, double learning_rate, double momentum, double weight_decay);
  void step(Mlp& model, const Gradients& grads);

 private:
  double lr_, momentum_, decay_;
  Gradients velocity_;
};

class Adam {
 public:
  explicit Adam(const Mlp& model, double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(Mlp& model, const Gradients& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  Gradients m_, v_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  // NaN when no validation set was supplied.
  double val_accuracy = 0.0;
};

void write_training_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

// Mini-batch SGD on softmax cross-entropy. `features` is called with the
// batch indices and the epoch and must return the batch inputs.
using BatchFn = std::function<Tensor(std::span<const std::size_t>, std::size_t epoch)>;

void train_classifier(Mlp& model, std::size_t n, std::span<const int> labels, const BatchFn& features,
                      const TrainConfig& config, std::vector<EpochLog>* log = nullptr,
                      const std::function<double()>& val_accuracy = {}, std::size_t first_epoch = 0);

// Argmax predictions of a classifier, evaluated in chunks.
std::vector<int> predict_labels(const Mlp& model, const Tensor& inputs);
double accuracy(std::span<const int> predicted, std::span<const int> labels);

// Checkpoints: magic, version, config hash, then per layer (in, out,
// activation, weights, bias). Little-endian, doubles as IEEE-754 bits.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_mlp(std::ostream& out, const Mlp& model);
// Throws kCorruptFile or kVersion; kShape when `expected_widths` is given and differs.
Mlp read_mlp(std::istream& in, const std::optional<std::vector<std::size_t>>& expected_widths = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Mlp*>& models, std::uint64_t config_hash);
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::vector<Mlp> models;
};
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::vector<std::vector<std::size_t>>& expected_widths = {});

}  // namespace tlab::neural
