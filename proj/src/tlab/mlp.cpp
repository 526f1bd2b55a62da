#include "tlab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "tlab/binary_io.hpp"
#include "tlab/random.hpp"

namespace tlab::neural {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
  }
  return "unknown";
}

namespace {

void apply_activation(Activation a, double* v, std::size_t n) {
  switch (a) {
    case Activation::kIdentity: break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 / (1.0 + std::exp(-v[i]));
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
      break;
  }
}

// Multiplies g by the activation derivative, expressed via the output y.
void activation_backward(Activation a, const double* y, double* g, std::size_t n) {
  switch (a) {
    case Activation::kIdentity: break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < n; ++i)
        if (!(y[i] > 0.0)) g[i] = 0.0;
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) g[i] *= y[i] * (1.0 - y[i]);
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < n; ++i) g[i] *= 1.0 - y[i] * y[i];
      break;
  }
}

void check_input(const Mlp& model, const Tensor& x) {
  if (model.layers().empty()) throw Error(ErrorCode::kShape, "model has no layers");
  if (x.shape().size() != 2 || x.cols() != model.input_dim())
    throw Error(ErrorCode::kShape, "input width " + std::to_string(x.cols()) + " does not match model input " +
                                       std::to_string(model.input_dim()));
}

void layer_forward(const DenseLayer& layer, const Tensor& x, Tensor& y) {
  const std::size_t m = x.rows();
  y = Tensor({m, layer.out()});
  for (std::size_t i = 0; i < m; ++i) std::copy(layer.bias.data(), layer.bias.data() + layer.out(), y.data() + i * layer.out());
  kernel::gemm_nn(x.data(), layer.weight.data(), y.data(), m, layer.in(), layer.out(), true);
  apply_activation(layer.activation, y.data(), y.size());
}

}  // namespace

void Gradients::zero() {
  for (auto& t : weight) t.fill(0.0);
  for (auto& t : bias) t.fill(0.0);
}

void Gradients::scale(double factor) {
  for (auto* group : {&weight, &bias})
    for (auto& t : *group)
      for (auto& v : t.values()) v *= factor;
}

void Gradients::add(const Gradients& other) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    for (std::size_t i = 0; i < weight[l].size(); ++i) weight[l][i] += other.weight[l][i];
    for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += other.bias[l][i];
  }
}

Mlp::Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output, std::uint64_t seed) {
  if (widths.size() < 2) throw Error(ErrorCode::kShape, "an MLP needs at least input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw Error(ErrorCode::kShape, "layer width must be positive");
  Rng rng(derive_seed(seed, {0x31a}));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.weight = Tensor({widths[l], widths[l + 1]});
    layer.bias = Tensor({widths[l + 1]});
    layer.activation = l + 2 == widths.size() ? output : hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    for (auto& v : layer.weight.values()) v = rng.uniform(-bound, bound);
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::kShape, "an MLP needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (L.weight.shape().size() != 2 || L.bias.size() != L.out())
      throw Error(ErrorCode::kShape, "layer " + std::to_string(l) + " has inconsistent parameter shapes");
    if (l > 0 && layers_[l - 1].out() != L.in())
      throw Error(ErrorCode::kShape, "layer " + std::to_string(l) + " input does not match previous output");
  }
}

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> w;
  if (layers_.empty()) return w;
  w.push_back(layers_.front().in());
  for (const auto& l : layers_) w.push_back(l.out());
  return w;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Tensor Mlp::forward(const Tensor& x) const {
  check_input(*this, x);
  Tensor cur = x;
  Tensor next;
  for (const auto& layer : layers_) {
    layer_forward(layer, cur, next);
    std::swap(cur, next);
  }
  return cur;
}

Tensor Mlp::forward(const Tensor& x, Cache& cache) const {
  check_input(*this, x);
  cache.activations.resize(layers_.size() + 1);
  cache.activations[0] = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) layer_forward(layers_[l], cache.activations[l], cache.activations[l + 1]);
  return cache.activations.back();
}

void Mlp::backward(const Cache& cache, const Tensor& grad_out, Gradients& grads, Tensor* grad_input) const {
  if (cache.activations.size() != layers_.size() + 1) throw Error(ErrorCode::kShape, "cache does not match model");
  const std::size_t m = grad_out.rows();
  Tensor g = grad_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const Tensor& y = cache.activations[l + 1];
    const Tensor& x = cache.activations[l];
    activation_backward(layer.activation, y.data(), g.data(), g.size());
    kernel::gemm_tn_acc(x.data(), g.data(), grads.weight[l].data(), m, layer.in(), layer.out());
    double* gb = grads.bias[l].data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < layer.out(); ++j) gb[j] += g[i * layer.out() + j];
    if (l > 0 || grad_input) {
      Tensor gx({m, layer.in()});
      kernel::gemm_nt(g.data(), layer.weight.data(), gx.data(), m, layer.in(), layer.out());
      g = std::move(gx);
    }
  }
  if (grad_input) *grad_input = std::move(g);
}

Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (const auto& l : layers_) {
    g.weight.emplace_back(l.weight.shape());
    g.bias.emplace_back(l.bias.shape());
  }
  return g;
}

void softmax_inplace(std::span<double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (double& v : row) s += (v = std::exp(v - mx));
  for (double& v : row) v /= s;
}

Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) softmax_inplace(p.row(i));
  return p;
}

namespace {

double cross_entropy(const Tensor& logits, std::span<const int> targets, Tensor* grad, std::size_t* correct) {
  const std::size_t m = logits.rows();
  const std::size_t k = logits.cols();
  double loss = 0.0;
  if (grad) *grad = Tensor({m, k});
  std::vector<double> p(k);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = logits.row(i);
    for (double v : row)
      if (!std::isfinite(v)) throw Error(ErrorCode::kNumeric, "non-finite activation in forward pass");
    std::copy(row.begin(), row.end(), p.begin());
    softmax_inplace(p);
    const auto t = static_cast<std::size_t>(targets[i]);
    const double mx = *std::max_element(row.begin(), row.end());
    double lse = 0.0;
    for (double v : row) lse += std::exp(v - mx);
    loss += mx + std::log(lse) - row[t];
    if (correct && static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()) == t) ++*correct;
    if (grad) {
      for (std::size_t j = 0; j < k; ++j) grad->at(i, j) = (p[j] - (j == t ? 1.0 : 0.0)) / static_cast<double>(m);
    }
  }
  return loss / static_cast<double>(m);
}

void check_targets(const Mlp& model, const Tensor& batch, std::span<const int> targets) {
  if (targets.size() != batch.rows())
    throw Error(ErrorCode::kShape, "batch has " + std::to_string(batch.rows()) + " rows but " +
                                       std::to_string(targets.size()) + " targets");
  for (int t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= model.output_dim())
      throw Error(ErrorCode::kShape, "target " + std::to_string(t) + " outside label range");
}

}  // namespace

LossAndGradients forward_backward(const Mlp& model, const Tensor& batch, std::span<const int> targets) {
  check_input(model, batch);
  check_targets(model, batch, targets);
  Mlp::Cache cache;
  const Tensor logits = model.forward(batch, cache);
  LossAndGradients out;
  Tensor grad;
  out.loss = cross_entropy(logits, targets, &grad, &out.correct);
  out.grads = model.zero_gradients();
  model.backward(cache, grad, out.grads);
  return out;
}

namespace {

long double activate_ld(Activation a, long double v) {
  switch (a) {
    case Activation::kIdentity: return v;
    case Activation::kRelu: return v > 0.0L ? v : 0.0L;
    case Activation::kSigmoid: return 1.0L / (1.0L + std::exp(-v));
    case Activation::kTanh: return std::tanh(v);
  }
  return v;
}

long double mean_cross_entropy_ld(const std::vector<long double>& z, std::size_t k, std::span<const int> targets) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const long double* row = z.data() + i * k;
    const long double mx = *std::max_element(row, row + k);
    long double s = 0.0L;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
    total += mx + std::log(s) - row[targets[i]];
  }
  return total / static_cast<long double>(targets.size());
}

}  // namespace

std::vector<long double> reference_forward(const Mlp& model, const Tensor& x) {
  check_input(model, x);
  return reference_forward(model, std::vector<long double>(x.values().begin(), x.values().end()), x.rows());
}

std::vector<long double> reference_forward(const Mlp& model, std::vector<long double> cur, std::size_t m) {
  if (model.layers().empty() || cur.size() != m * model.input_dim())
    throw Error(ErrorCode::kShape, "input does not match model input");
  std::vector<long double> next;
  for (const auto& layer : model.layers()) {
    const std::size_t in = layer.in(), out = layer.out();
    next.assign(m * out, 0.0L);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < out; ++j) {
        long double acc = layer.bias[j];
        for (std::size_t p = 0; p < in; ++p) acc += cur[i * in + p] * static_cast<long double>(layer.weight[p * out + j]);
        next[i * out + j] = activate_ld(layer.activation, acc);
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

double compare_gradients(const std::vector<std::pair<Tensor*, const Tensor*>>& params,
                         const std::function<long double(std::size_t, std::size_t)>& loss, double eps,
                         std::size_t max_per_tensor) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be positive");
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto* param = params[t].first;
    const auto* analytic = params[t].second;
    const std::size_t n = param->size();
    const std::size_t count = max_per_tensor == 0 ? n : std::min(n, max_per_tensor);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = count == n ? k : k * n / count;
      double& p = (*param)[i];
      const double saved = p;
      p = saved + eps;
      const long double hi = p;
      const long double up = loss(t, i);
      p = saved - eps;
      const long double lo = p;
      const long double down = loss(t, i);
      p = saved;
      const double numeric = static_cast<double>((up - down) / (hi - lo));
      const double a = (*analytic)[i];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      if (scale < 1e-10) continue;
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

double grad_check(const Mlp& model, const Tensor& input, std::span<const int> targets, double eps,
                  const std::function<void(Gradients&)>& tamper, std::size_t max_per_tensor) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be positive");
  auto analytic = forward_backward(model, input, targets).grads;
  if (tamper) tamper(analytic);
  Mlp probe = model;
  std::vector<std::pair<Tensor*, const Tensor*>> params;
  for (std::size_t l = 0; l < probe.layers().size(); ++l) {
    params.emplace_back(&probe.layers()[l].weight, &analytic.weight[l]);
    params.emplace_back(&probe.layers()[l].bias, &analytic.bias[l]);
  }
  // Long double activations of the unperturbed model; a perturbed entry of
  // layer l only changes one column of layer l's output.
  const std::size_t m = input.rows();
  const auto& layers = probe.layers();
  std::vector<std::vector<long double>> acts{std::vector<long double>(input.values().begin(), input.values().end())};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Mlp one({layers[l]});
    acts.push_back(reference_forward(one, acts[l], m));
  }
  auto loss = [&](std::size_t t, std::size_t entry) {
    const std::size_t l = t / 2;
    const auto& layer = layers[l];
    const std::size_t in = layer.in(), out = layer.out();
    const std::size_t j = t % 2 == 0 ? entry % out : entry;
    auto h = acts[l + 1];
    for (std::size_t i = 0; i < m; ++i) {
      long double acc = layer.bias[j];
      for (std::size_t p = 0; p < in; ++p) acc += acts[l][i * in + p] * static_cast<long double>(layer.weight[p * out + j]);
      h[i * out + j] = activate_ld(layer.activation, acc);
    }
    for (std::size_t q = l + 1; q < layers.size(); ++q) h = reference_forward(Mlp({layers[q]}), std::move(h), m);
    return mean_cross_entropy_ld(h, model.output_dim(), targets);
  };
  return compare_gradients(params, loss, eps, max_per_tensor);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) throw Error(ErrorCode::kInvalidArgument, "momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw Error(ErrorCode::kInvalidArgument, "weight decay must be >= 0");
}

Sgd::Sgd(const Mlp& model, double learning_rate, double momentum, double weight_decay)
    : lr_(learning_rate), momentum_(momentum), decay_(weight_decay), velocity_(model.zero_gradients()) {}

void Sgd::step(Mlp& model, const Gradients& grads) {
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    auto& layer = model.layers()[l];
    auto update = [&](Tensor& param, const Tensor& grad, Tensor& vel, bool decay) {
      for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i] + (decay ? decay_ * param[i] : 0.0);
        vel[i] = momentum_ * vel[i] + g;
        param[i] -= lr_ * vel[i];
      }
    };
    update(layer.weight, grads.weight[l], velocity_.weight[l], true);
    update(layer.bias, grads.bias[l], velocity_.bias[l], false);
  }
}

Adam::Adam(const Mlp& model, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(model.zero_gradients()), v_(model.zero_gradients()) {}

void Adam::step(Mlp& model, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    auto& layer = model.layers()[l];
    auto update = [&](Tensor& param, const Tensor& grad, Tensor& m, Tensor& v) {
      for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
        param[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      }
    };
    update(layer.weight, grads.weight[l], m_.weight[l], v_.weight[l]);
    update(layer.bias, grads.bias[l], m_.bias[l], v_.bias[l]);
  }
}

void write_training_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,loss,train_acc,val_acc\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.6f,", e.epoch, e.loss, e.train_accuracy);
    out << buf;
    if (std::isnan(e.val_accuracy)) {
      out << "\n";
    } else {
      std::snprintf(buf, sizeof buf, "%.6f\n", e.val_accuracy);
      out << buf;
    }
  }
}

void train_classifier(Mlp& model, std::size_t n, std::span<const int> labels, const BatchFn& features,
                      const TrainConfig& config, std::vector<EpochLog>* log,
                      const std::function<double()>& val_accuracy, std::size_t first_epoch) {
  config.validate();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "training pool is empty");
  Sgd opt(model, config.learning_rate, config.momentum, config.weight_decay);
  std::vector<std::size_t> order(n);
  std::vector<int> targets;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, {0x5e9, first_epoch + epoch}));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      targets.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) targets[i] = labels[idx[i]];
      const Tensor batch = features(idx, first_epoch + epoch);
      auto lg = forward_backward(model, batch, targets);
      if (!std::isfinite(lg.loss))
        throw Error(ErrorCode::kTraining, "non-finite loss at epoch " + std::to_string(first_epoch + epoch));
      opt.step(model, lg.grads);
      loss_sum += lg.loss * static_cast<double>(idx.size());
      correct += lg.correct;
    }
    if (log) {
      EpochLog e;
      e.epoch = first_epoch + epoch;
      e.loss = loss_sum / static_cast<double>(n);
      e.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
      e.val_accuracy = val_accuracy ? val_accuracy() : std::numeric_limits<double>::quiet_NaN();
      log->push_back(e);
    }
  }
}

std::vector<int> predict_labels(const Mlp& model, const Tensor& inputs) {
  std::vector<int> out;
  out.reserve(inputs.rows());
  const std::size_t chunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < inputs.rows(); start += chunk) {
    const std::size_t end = std::min(inputs.rows(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = model.forward(gather_rows(inputs, idx));
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      const auto r = logits.row(i);
      out.push_back(static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin()));
    }
  }
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size() || labels.empty()) throw Error(ErrorCode::kShape, "accuracy needs equal nonempty lists");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

namespace {
constexpr char kMlpMagic[8] = {'T', 'L', 'A', 'B', 'M', 'L', 'P', '\0'};
constexpr char kCheckpointMagic[8] = {'T', 'L', 'A', 'B', 'C', 'K', 'P', '\0'};
}  // namespace

void write_mlp(std::ostream& out, const Mlp& model) {
  out.write(kMlpMagic, 8);
  binary::put_u32(out, static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    binary::put_u64(out, l.in());
    binary::put_u64(out, l.out());
    binary::put_u32(out, static_cast<std::uint32_t>(l.activation));
    binary::put_f64s(out, l.weight.values());
    binary::put_f64s(out, l.bias.values());
  }
}

Mlp read_mlp(std::istream& in, const std::optional<std::vector<std::size_t>>& expected_widths) {
  char magic[8];
  binary::get_raw(in, magic, 8);
  if (!std::equal(magic, magic + 8, kMlpMagic)) throw Error(ErrorCode::kCorruptFile, "bad model magic");
  const std::uint32_t n = binary::get_u32(in);
  if (n == 0 || n > 64) throw Error(ErrorCode::kCorruptFile, "implausible layer count");
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < n; ++l) {
    const std::uint64_t rows = binary::get_u64(in);
    const std::uint64_t cols = binary::get_u64(in);
    const std::uint32_t act = binary::get_u32(in);
    if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24) || act > 3)
      throw Error(ErrorCode::kCorruptFile, "implausible layer header");
    DenseLayer layer;
    layer.weight = Tensor({rows, cols});
    layer.bias = Tensor({cols});
    layer.activation = static_cast<Activation>(act);
    binary::get_f64s(in, layer.weight.values());
    binary::get_f64s(in, layer.bias.values());
    layers.push_back(std::move(layer));
  }
  Mlp model(std::move(layers));
  if (expected_widths && model.widths() != *expected_widths)
    throw Error(ErrorCode::kShape, "checkpoint layer widths do not match the configured model");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Mlp*>& models, std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(kCheckpointMagic, 8);
  binary::put_u32(out, kCheckpointVersion);
  binary::put_u64(out, config_hash);
  binary::put_u32(out, static_cast<std::uint32_t>(models.size()));
  for (const Mlp* m : models) write_mlp(out, *m);
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::vector<std::vector<std::size_t>>& expected_widths) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  char magic[8];
  binary::get_raw(in, magic, 8);
  if (!std::equal(magic, magic + 8, kCheckpointMagic)) throw Error(ErrorCode::kCorruptFile, "bad checkpoint magic");
  const std::uint32_t version = binary::get_u32(in);
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::kVersion, "checkpoint version " + std::to_string(version) + " is not supported");
  Checkpoint ck;
  ck.config_hash = binary::get_u64(in);
  const std::uint32_t n = binary::get_u32(in);
  if (n > 16) throw Error(ErrorCode::kCorruptFile, "implausible model count");
  if (!expected_widths.empty() && expected_widths.size() != n)
    throw Error(ErrorCode::kShape, "checkpoint holds a different number of networks");
  for (std::uint32_t i = 0; i < n; ++i)
    ck.models.push_back(read_mlp(in, expected_widths.empty() ? std::nullopt : std::optional(expected_widths[i])));
  return ck;
}

}  // namespace tlab::neural
