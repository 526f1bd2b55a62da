#include "tlab/readout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "tlab/parallel.hpp"

namespace tlab::neural {

PatchBag patch_bag(std::span<const double> image, const ImageShape& shape, std::size_t patch_size,
                   std::size_t n_patches, std::uint64_t seed) {
  if (patch_size == 0 || patch_size > shape.height || patch_size > shape.width)
    throw Error(ErrorCode::kShape, "patch size " + std::to_string(patch_size) + " does not fit a " +
                                       std::to_string(shape.height) + "x" + std::to_string(shape.width) + " image");
  if (n_patches < 1) throw Error(ErrorCode::kInvalidArgument, "n_patches must be >= 1");
  if (image.size() != shape.size()) throw Error(ErrorCode::kShape, "image size does not match its shape");
  const std::size_t c = shape.channels;
  const std::size_t row_len = patch_size * c;
  PatchBag bag;
  bag.patches = Tensor({n_patches, patch_size * row_len});
  Rng rng(seed);
  for (std::size_t k = 0; k < n_patches; ++k) {
    const std::size_t top = rng.index(shape.height - patch_size + 1);
    const std::size_t left = rng.index(shape.width - patch_size + 1);
    bag.offsets.emplace_back(top, left);
    double* dst = bag.patches.data() + k * patch_size * row_len;
    for (std::size_t a = 0; a < patch_size; ++a) {
      const double* src = image.data() + ((top + a) * shape.width + left) * c;
      std::copy(src, src + row_len, dst + a * row_len);
    }
  }
  return bag;
}

PatchBagEncoder::PatchBagEncoder(const ImageShape& shape, std::size_t patch_size, std::size_t n_patches,
                                 std::size_t embed_dim, std::uint64_t seed)
    : shape_(shape), patch_size_(patch_size), n_patches_(n_patches) {
  if (patch_size == 0 || patch_size > shape.height || patch_size > shape.width)
    throw Error(ErrorCode::kShape, "patch size does not fit the image");
  if (n_patches < 1 || embed_dim < 1) throw Error(ErrorCode::kInvalidArgument, "n_patches and embed_dim must be >= 1");
  const std::size_t in = patch_size * patch_size * shape.channels;
  projection_.weight = Tensor({in, embed_dim});
  projection_.bias = Tensor({embed_dim});
  projection_.activation = Activation::kRelu;
  Rng rng(derive_seed(seed, {0xba9}));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : projection_.weight.values()) v = rng.uniform(-bound, bound);
  for (auto& v : projection_.bias.values()) v = rng.uniform(-0.1, 0.1);
}

std::vector<double> PatchBagEncoder::pool(const Tensor& patches) const {
  const Mlp one({projection_});
  const Tensor h = one.forward(patches);
  std::vector<double> out(output_dim(), 0.0);
  for (std::size_t k = 0; k < h.rows(); ++k)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += h.at(k, j);
  for (double& v : out) v /= static_cast<double>(h.rows());
  return out;
}

std::vector<double> PatchBagEncoder::encode(std::span<const double> image, std::uint64_t bag_seed) const {
  return pool(patch_bag(image, shape_, patch_size_, n_patches_, bag_seed).patches);
}

Tensor PatchBagEncoder::encode_all(const Tensor& images, std::uint64_t seed) const {
  Tensor out({images.rows(), output_dim()});
  for (std::size_t i = 0; i < images.rows(); ++i) {
    const auto e = encode(images.row(i), derive_seed(seed, {0xba6, i}));
    std::copy(e.begin(), e.end(), out.data() + i * output_dim());
  }
  return out;
}

void RepresentationTable::sample(std::size_t row, Rng& rng, std::span<double> out) const {
  const auto mu = mean.row(row);
  if (!stochastic()) {
    std::copy(mu.begin(), mu.end(), out.begin());
    return;
  }
  const auto lv = logvar.row(row);
  for (std::size_t k = 0; k < mu.size(); ++k) out[k] = mu[k] + rng.normal() * std::exp(0.5 * lv[k]);
}

RepresentationTable vae_representation(const VaeModel& vae, const Tensor& images) {
  RepresentationTable t;
  vae.encode(images, t.mean, t.logvar);
  return t;
}

RepresentationTable noise_representation(std::size_t rows, std::size_t dim) {
  RepresentationTable t;
  t.mean = Tensor({rows, dim});
  t.logvar = Tensor({rows, dim});
  return t;
}

RepresentationTable zero_representation(std::size_t rows, std::size_t dim) {
  RepresentationTable t;
  t.mean = Tensor({rows, dim});
  return t;
}

RepresentationTable supplied_representation(Tensor features) {
  if (features.shape().size() != 2) throw Error(ErrorCode::kShape, "feature table must be 2-D");
  RepresentationTable t;
  t.mean = std::move(features);
  return t;
}

RepresentationTable load_feature_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(rows + 1) + ": not a number: " + cell);
      }
      ++n;
    }
    if (rows == 0) cols = n;
    if (n != cols || n == 0)
      throw Error(ErrorCode::kShape, path.string() + ":" + std::to_string(rows + 1) + ": inconsistent column count");
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::kShape, path.string() + " holds no features");
  return supplied_representation(Tensor({rows, cols}, std::move(values)));
}

const char* readout_pairing_name(ReadoutPairing p) {
  return p == ReadoutPairing::kSameCategory ? "same-category" : "same-instance";
}

const char* inference_pairing_name(InferencePairing p) {
  return p == InferencePairing::kRandom ? "random" : "same-category";
}

ReadoutNet::ReadoutNet(Mlp net, std::size_t bag_dim, std::size_t rep_dim)
    : net_(std::move(net)), bag_dim_(bag_dim), rep_dim_(rep_dim) {
  if (net_.layers().size() < 2 || net_.input_dim() != bag_dim + rep_dim)
    throw Error(ErrorCode::kShape, "readout needs a hidden layer over [bag, r] inputs");
}

namespace {

std::vector<std::vector<std::size_t>> group_by_class(std::span<const int> labels, std::size_t num_classes) {
  std::vector<std::vector<std::size_t>> by(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
      throw Error(ErrorCode::kShape, "label " + std::to_string(labels[i]) + " outside [0, " +
                                         std::to_string(num_classes) + ")");
    by[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return by;
}

}  // namespace

ReadoutNet train_readout(const Tensor& bags, std::span<const int> labels, std::size_t num_classes,
                         const RepresentationTable& reps, const ReadoutConfig& config, std::vector<EpochLog>* log,
                         const std::function<double()>& val_accuracy) {
  config.train.validate();
  const std::size_t n = bags.rows();
  if (labels.size() != n || reps.rows() != n)
    throw Error(ErrorCode::kShape, "bags, labels and representations must have one row per pool sample");
  const auto by_class = group_by_class(labels, num_classes);
  for (std::size_t k = 0; k < num_classes; ++k)
    if (by_class[k].empty()) throw Error(ErrorCode::kClassCoverage, "class " + std::to_string(k) + " has no training sample");

  const std::size_t bag_dim = bags.cols();
  const std::size_t rep_dim = reps.dim();
  Mlp net({bag_dim + rep_dim, config.hidden, config.hidden, num_classes}, Activation::kRelu, Activation::kIdentity,
          derive_seed(config.train.seed, {0x4ead}));
  if (net.parameter_count() > config.parameter_budget)
    throw Error(ErrorCode::kInvalidArgument, "readout has " + std::to_string(net.parameter_count()) +
                                                 " parameters, above the budget of " +
                                                 std::to_string(config.parameter_budget));

  bool zero_r = true;
  const BatchFn features = [&](std::span<const std::size_t> idx, std::size_t epoch) {
    Tensor batch({idx.size(), bag_dim + rep_dim});
    // One stream per (epoch, batch start) keeps r draws independent of batch order.
    Rng rng(derive_seed(config.train.seed, {0x7a1, epoch, idx.front()}));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const std::size_t i = idx[b];
      std::size_t xp = i;
      if (config.pairing == ReadoutPairing::kSameCategory) {
        const auto& members = by_class[static_cast<std::size_t>(labels[i])];
        xp = members[rng.index(members.size())];
      }
      const auto bag = bags.row(xp);
      double* dst = batch.data() + b * (bag_dim + rep_dim);
      std::copy(bag.begin(), bag.end(), dst);
      if (!zero_r) reps.sample(i, rng, std::span<double>(dst + bag_dim, rep_dim));
    }
    return batch;
  };

  TrainConfig warm = config.train;
  warm.epochs = config.warmup_epochs;
  train_classifier(net, n, labels, features, warm, log, val_accuracy, 0);
  zero_r = false;
  train_classifier(net, n, labels, features, config.train, log, val_accuracy, config.warmup_epochs);
  return ReadoutNet(std::move(net), bag_dim, rep_dim);
}

Mlp train_erm(const Tensor& inputs, std::span<const int> labels, std::size_t num_classes,
              const std::vector<std::size_t>& hidden, const TrainConfig& config, std::vector<EpochLog>* log,
              const std::function<double()>& val_accuracy) {
  if (inputs.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "training pool is empty");
  if (labels.size() != inputs.rows()) throw Error(ErrorCode::kShape, "one label per input row is required");
  std::vector<std::size_t> widths{inputs.cols()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(num_classes);
  Mlp net(widths, Activation::kRelu, Activation::kIdentity, derive_seed(config.seed, {0xe5a}));
  const BatchFn features = [&](std::span<const std::size_t> idx, std::size_t) { return gather_rows(inputs, idx); };
  train_classifier(net, inputs.rows(), labels, features, config, log, val_accuracy);
  return net;
}

CausalPredictor::CausalPredictor(const ReadoutNet& readout, const Tensor& pool_bags, std::vector<int> pool_labels)
    : rep_dim_(readout.rep_dim()),
      hidden_(readout.net().layers().front().out()),
      activation_(readout.net().layers().front().activation),
      pool_labels_(std::move(pool_labels)) {
  if (pool_bags.rows() == 0) throw Error(ErrorCode::kPool, "x′ pool is empty");
  if (pool_bags.cols() != readout.bag_dim()) throw Error(ErrorCode::kShape, "pool bag width does not match the readout");
  if (!pool_labels_.empty() && pool_labels_.size() != pool_bags.rows())
    throw Error(ErrorCode::kShape, "pool labels must match pool rows");
  const auto& first = readout.net().layers().front();
  const std::size_t bag_dim = readout.bag_dim();
  rep_weight_ = Tensor({rep_dim_, hidden_},
                       std::vector<double>(first.weight.data() + bag_dim * hidden_,
                                           first.weight.data() + (bag_dim + rep_dim_) * hidden_));
  bias_ = first.bias;
  pool_terms_ = Tensor({pool_bags.rows(), hidden_});
  kernel::gemm_nn(pool_bags.data(), first.weight.data(), pool_terms_.data(), pool_bags.rows(), bag_dim, hidden_, false);
  tail_ = Mlp(std::vector<DenseLayer>(readout.net().layers().begin() + 1, readout.net().layers().end()));
  if (!pool_labels_.empty()) by_class_ = group_by_class(pool_labels_, readout.num_classes());
}

estimand::DoEstimate CausalPredictor::estimate(const RepresentationTable& reps, std::size_t row,
                                               const SamplingOptions& options, int label) const {
  if (reps.dim() != rep_dim_) throw Error(ErrorCode::kShape, "representation width does not match the readout");
  const std::vector<std::size_t>* members = nullptr;
  if (options.pairing == InferencePairing::kSameCategory) {
    if (label < 0 || static_cast<std::size_t>(label) >= by_class_.size())
      throw Error(ErrorCode::kInvalidArgument, "same-category inference needs the query label and pool labels");
    members = &by_class_[static_cast<std::size_t>(label)];
  }
  const std::size_t pool_size = members ? members->size() : pool_terms_.rows();

  estimand::MonteCarloOptions mc;
  mc.n_i = options.n_i;
  mc.n_j = options.n_j;
  mc.seed = derive_seed(options.seed, {0xa19, row});

  auto sample_rep = [&](Rng& rng) {
    std::vector<double> r(rep_dim_);
    reps.sample(row, rng, r);
    std::vector<double> a(bias_.values());
    kernel::gemm_nn(r.data(), rep_weight_.data(), a.data(), 1, rep_dim_, hidden_, true);
    return a;
  };
  auto readout = [&](const std::vector<double>& a, std::span<const std::size_t> idx, std::span<double> out) {
    Tensor h({idx.size(), hidden_});
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const std::size_t p = members ? (*members)[idx[j]] : idx[j];
      const auto term = pool_terms_.row(p);
      double* hj = h.data() + j * hidden_;
      for (std::size_t k = 0; k < hidden_; ++k) hj[k] = a[k] + term[k];
    }
    switch (activation_) {
      case Activation::kRelu:
        for (auto& v : h.values()) v = v > 0.0 ? v : 0.0;
        break;
      case Activation::kIdentity: break;
      case Activation::kSigmoid:
        for (auto& v : h.values()) v = 1.0 / (1.0 + std::exp(-v));
        break;
      case Activation::kTanh:
        for (auto& v : h.values()) v = std::tanh(v);
        break;
    }
    Tensor probs = softmax(tail_.forward(h));
    std::copy(probs.values().begin(), probs.values().end(), out.begin());
  };
  return estimand::mc_do_estimate(sample_rep, readout, pool_size, tail_.output_dim(), mc);
}

std::vector<int> CausalPredictor::predict(const RepresentationTable& reps, const SamplingOptions& options,
                                          std::span<const int> labels) const {
  const std::size_t n = reps.rows();
  std::vector<int> out(n);
  auto run = [&](std::size_t q) {
    const int label = labels.empty() ? -1 : labels[q];
    out[q] = estimand::predict_class(estimate(reps, q, options, label));
  };
  parallel_for(n, options.threads, run);
  return out;
}

}  // namespace tlab::neural
