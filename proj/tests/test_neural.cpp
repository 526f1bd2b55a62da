#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "tlab/error.hpp"
#include "tlab/mlp.hpp"
#include "tlab/random.hpp"
#include "tlab/readout.hpp"
#include "tlab/vae.hpp"

using namespace tlab;
using namespace tlab::neural;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

Tensor random_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

std::vector<int> random_labels(std::size_t n, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
  return y;
}

// Small nonzero biases so no hidden unit sits exactly on a ReLU kink.
void jitter_biases(Mlp& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : m.layers())
    for (auto& v : l.bias.values()) v = rng.uniform(-0.05, 0.05);
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "tlab_test_neural";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("tensor shape and data length") {
  Tensor t({3, 4});
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 4);
  CHECK(t.size() == 12);
  CHECK(code_of([] { Tensor({2, 2}, std::vector<double>(3)); }) == ErrorCode::kShape);
  const std::vector<std::size_t> idx{2, 0};
  Tensor src({3, 2}, {1, 2, 3, 4, 5, 6});
  const auto g = gather_rows(src, idx);
  CHECK(g.values() == std::vector<double>{5, 6, 1, 2});
}

TEST_CASE("softmax rows sum to one") {
  Tensor logits = random_inputs(20, 7, 3, -30.0, 30.0);
  logits.at(0, 0) = 700.0;
  const auto p = softmax(logits);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto r = p.row(i);
    CHECK(std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0) <= 1e-9);
    for (double v : r) CHECK(v >= 0.0);
  }
}

TEST_CASE("zero weights give loss ln K") {
  Mlp m({5, 4, 6}, Activation::kRelu, Activation::kIdentity, 1);
  for (auto& l : m.layers()) {
    l.weight.fill(0.0);
    l.bias.fill(0.0);
  }
  const auto x = random_inputs(8, 5, 2);
  const auto y = random_labels(8, 6, 3);
  CHECK(forward_backward(m, x, y).loss == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("forward_backward rejects bad shapes and targets") {
  Mlp m({4, 3}, Activation::kRelu, Activation::kIdentity, 1);
  const std::vector<int> y{0, 1};
  CHECK(code_of([&] { forward_backward(m, random_inputs(2, 5, 1), y); }) == ErrorCode::kShape);
  const std::vector<int> bad{0, 3};
  CHECK(code_of([&] { forward_backward(m, random_inputs(2, 4, 1), bad); }) == ErrorCode::kShape);
  Tensor x = random_inputs(2, 4, 1);
  x[0] = std::nan("");
  CHECK(code_of([&] { forward_backward(m, x, y); }) == ErrorCode::kNumeric);
}

TEST_CASE("two separable points: loss decreases") {
  Mlp m({2, 8, 2}, Activation::kRelu, Activation::kIdentity, 4);
  Tensor x({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const std::vector<int> y{0, 1};
  const double before = forward_backward(m, x, y).loss;
  Sgd opt(m, 0.1, 0.0, 0.0);
  for (int step = 0; step < 100; ++step) opt.step(m, forward_backward(m, x, y).grads);
  const auto after = forward_backward(m, x, y);
  CHECK(after.loss < before);
  CHECK(after.correct == 2);
}

TEST_CASE("adam also fits the separable pair") {
  Mlp m({2, 8, 2}, Activation::kTanh, Activation::kIdentity, 5);
  Tensor x({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const std::vector<int> y{1, 0};
  const double before = forward_backward(m, x, y).loss;
  Adam opt(m, 0.01);
  for (int step = 0; step < 100; ++step) opt.step(m, forward_backward(m, x, y).grads);
  CHECK(forward_backward(m, x, y).loss < before);
}

TEST_CASE("grad check: three-layer network, every activation") {
  for (auto act : {Activation::kRelu, Activation::kSigmoid, Activation::kTanh}) {
    CAPTURE(activation_name(act));
    Mlp m({6, 5, 4, 3}, act, Activation::kIdentity, 7);
    jitter_biases(m, 8);
    const auto x = random_inputs(5, 6, 9, -1.0, 1.0);
    const auto y = random_labels(5, 3, 10);
    CHECK(grad_check(m, x, y, 1e-5) <= 1e-4);
  }
}

TEST_CASE("grad check: ERM architectures") {
  for (std::size_t k : {10u, 2u}) {
    CAPTURE(k);
    Mlp m({768, 64, 64, k}, Activation::kRelu, Activation::kIdentity, 11);
    jitter_biases(m, 12);
    const auto x = random_inputs(4, 768, 13);
    const auto y = random_labels(4, static_cast<int>(k), 14);
    CHECK(grad_check(m, x, y, 1e-5) <= 1e-4);
  }
}

TEST_CASE("grad check: readout architectures") {
  for (std::size_t k : {10u, 2u}) {
    CAPTURE(k);
    Mlp m({32 + 32, 64, 64, k}, Activation::kRelu, Activation::kIdentity, 15);
    jitter_biases(m, 16);
    const auto x = random_inputs(6, 64, 17, -1.0, 1.0);
    const auto y = random_labels(6, static_cast<int>(k), 18);
    CHECK(grad_check(m, x, y, 1e-5) <= 1e-4);
  }
}

TEST_CASE("grad check: VAE encoder and decoder") {
  VaeConfig cfg;
  cfg.latent_dim = 32;
  cfg.hidden = 128;
  VaeModel vae(768, cfg);
  jitter_biases(vae.encoder(), 19);
  jitter_biases(vae.decoder(), 20);
  const auto x = random_inputs(3, 768, 21);
  CHECK(vae_grad_check(vae, x, 22, 1e-5, 400) <= 1e-4);
}

TEST_CASE("grad check detects tampered gradients") {
  Mlp m({6, 5, 3}, Activation::kTanh, Activation::kIdentity, 23);
  const auto x = random_inputs(4, 6, 24, -1.0, 1.0);
  const auto y = random_labels(4, 3, 25);
  CHECK(grad_check(m, x, y, 1e-5, [](Gradients& g) { g.weight[0][3] += 0.05; }) > 1e-2);

  VaeConfig cfg;
  cfg.latent_dim = 2;
  cfg.hidden = 8;
  VaeModel vae(6, cfg);
  CHECK(vae_grad_check(vae, random_inputs(2, 6, 26), 27, 1e-5, 0, [](Gradients& g) { g.weight[0][0] += 0.5; }) >
        1e-2);
}

TEST_CASE("grad check of a constant model is zero") {
  // One class: the loss is identically zero.
  Mlp one({3, 1}, Activation::kRelu, Activation::kIdentity, 1);
  const std::vector<int> y{0, 0};
  CHECK(grad_check(one, random_inputs(2, 3, 2), y, 1e-5) == 0.0);
}

TEST_CASE("grad check subsampling probes a subset") {
  Mlp m({20, 10, 3}, Activation::kTanh, Activation::kIdentity, 28);
  const auto x = random_inputs(3, 20, 29, -1.0, 1.0);
  const auto y = random_labels(3, 3, 30);
  CHECK(grad_check(m, x, y, 1e-5, {}, 5) <= 1e-4);
  // Entry 1 of the first weight is not among 5 evenly spaced entries of 200.
  CHECK(grad_check(m, x, y, 1e-5, [](Gradients& g) { g.weight[0][1] += 1.0; }, 5) <= 1e-4);
  CHECK(grad_check(m, x, y, 1e-5, [](Gradients& g) { g.weight[0][40] += 1.0; }, 5) > 1e-2);
}

TEST_CASE("VAE: ELBO improves with training") {
  Rng rng(31);
  // Two prototypes plus noise.
  Tensor x({200, 16});
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = 0; j < 16; ++j)
      x.at(i, j) = std::clamp(((i % 2 == 0) == (j < 8) ? 0.9 : 0.1) + 0.05 * rng.normal(), 0.0, 1.0);
  VaeConfig cfg;
  cfg.latent_dim = 16;
  cfg.hidden = 32;
  cfg.epochs = 0;
  cfg.seed = 32;
  const VaeModel init = train_vae(x, cfg);
  CHECK(init == VaeModel(16, cfg));
  cfg.epochs = 30;
  std::vector<VaeEpochLog> log;
  const VaeModel trained = train_vae(x, cfg, &log);
  CHECK(log.size() == 30);
  CHECK(trained.elbo(x, 33) > init.elbo(x, 33));
  CHECK(log.back().elbo > log.front().elbo);

  // Per-pixel mean absolute error: encoded mean versus a random latent.
  Tensor mean, logvar;
  trained.encode(x, mean, logvar);
  const Tensor rec = trained.decode(mean);
  const Tensor rnd = trained.decode(random_inputs(200, 16, 34, -2.0, 2.0));
  double e_rec = 0.0, e_rnd = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e_rec += std::abs(rec[i] - x[i]);
    e_rnd += std::abs(rnd[i] - x[i]);
  }
  CHECK(e_rec / static_cast<double>(x.size()) < e_rnd / static_cast<double>(x.size()));
}

TEST_CASE("patch bag") {
  const ImageShape shape{6, 5, 2};
  const auto img = random_inputs(1, shape.size(), 35);
  SUBCASE("full-image patch equals the image") {
    const ImageShape sq{5, 5, 2};
    const auto im = random_inputs(1, sq.size(), 36);
    const auto bag = patch_bag(im.row(0), sq, 5, 3, 1);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto r = bag.patches.row(k);
      CHECK(std::equal(r.begin(), r.end(), im.row(0).begin()));
    }
  }
  SUBCASE("seeds change the offsets") {
    const auto a = patch_bag(img.row(0), shape, 2, 16, 1);
    const auto b = patch_bag(img.row(0), shape, 2, 16, 2);
    CHECK(a.offsets != b.offsets);
    CHECK(a.offsets == patch_bag(img.row(0), shape, 2, 16, 1).offsets);
  }
  SUBCASE("pooling is permutation symmetric") {
    const PatchBagEncoder enc(shape, 2, 8, 12, 37);
    const auto bag = patch_bag(img.row(0), shape, 2, 8, 38);
    std::vector<std::size_t> order(8);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(39);
    rng.shuffle(order);
    const auto a = enc.pool(bag.patches);
    const auto b = enc.pool(gather_rows(bag.patches, order));
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(a[j] - b[j]) <= 1e-12);
  }
  SUBCASE("oversize patch") {
    CHECK(code_of([&] { patch_bag(img.row(0), shape, 6, 1, 1); }) == ErrorCode::kShape);
    CHECK(code_of([&] { PatchBagEncoder(shape, 7, 1, 4, 1); }) == ErrorCode::kShape);
  }
}

TEST_CASE("readout: class coverage, budget and zero epochs") {
  const auto bags = random_inputs(20, 4, 40);
  const auto reps = supplied_representation(random_inputs(20, 3, 41));
  std::vector<int> y = random_labels(20, 2, 42);
  ReadoutConfig cfg;
  cfg.hidden = 8;
  cfg.train.epochs = 0;
  cfg.warmup_epochs = 0;
  CHECK(code_of([&] { train_readout(bags, y, 3, reps, cfg); }) == ErrorCode::kClassCoverage);
  cfg.parameter_budget = 10;
  CHECK(code_of([&] { train_readout(bags, y, 2, reps, cfg); }) == ErrorCode::kInvalidArgument);
  cfg.parameter_budget = 50000;
  const auto net = train_readout(bags, y, 2, reps, cfg);
  CHECK(net.bag_dim() == 4);
  CHECK(net.rep_dim() == 3);
  CHECK(net.num_classes() == 2);
}

TEST_CASE("causal predictor: probabilities and split first layer") {
  const std::size_t n = 30;
  const auto bags = random_inputs(n, 4, 43);
  const auto reps = supplied_representation(random_inputs(n, 3, 44));
  const auto y = random_labels(n, 3, 45);
  ReadoutConfig cfg;
  cfg.hidden = 6;
  cfg.train.epochs = 3;
  cfg.warmup_epochs = 1;
  const auto net = train_readout(bags, y, 3, reps, cfg);
  const CausalPredictor pred(net, bags, y);
  SamplingOptions opt;
  opt.n_i = 2;
  opt.n_j = 5;
  const auto est = pred.estimate(reps, 0, opt);
  double s = 0.0;
  for (double p : est.dist) s += p;
  CHECK(std::abs(s - 1.0) <= 1e-9);

  // n_i = n_j = 1 with a deterministic representation is a single readout call
  // on the x′ the predictor drew; compare against the unsplit network for
  // every pool element and require one of them to match.
  opt.n_i = 1;
  opt.n_j = 1;
  const auto one = pred.estimate(reps, 5, opt);
  bool matched = false;
  for (std::size_t j = 0; j < n; ++j) {
    Tensor in({1, 7});
    for (std::size_t k = 0; k < 4; ++k) in[k] = bags.at(j, k);
    for (std::size_t k = 0; k < 3; ++k) in[4 + k] = reps.mean.at(5, k);
    const auto p = softmax(net.net().forward(in));
    double d = 0.0;
    for (std::size_t c = 0; c < 3; ++c) d = std::max(d, std::abs(p[c] - one.dist[c]));
    matched = matched || d <= 1e-12;
  }
  CHECK(matched);

  const auto a = pred.predict(reps, SamplingOptions{3, 4, 9, InferencePairing::kRandom, 1});
  const auto b = pred.predict(reps, SamplingOptions{3, 4, 9, InferencePairing::kRandom, 3});
  CHECK(a == b);
}

TEST_CASE("untrained readout: uniform outputs break ties to label 0") {
  Mlp zero({4 + 3, 5, 5, 3}, Activation::kRelu, Activation::kIdentity, 1);
  for (auto& l : zero.layers()) {
    l.weight.fill(0.0);
    l.bias.fill(0.0);
  }
  const ReadoutNet net(zero, 4, 3);
  const auto bags = random_inputs(10, 4, 60);
  const auto reps = supplied_representation(random_inputs(10, 3, 61));
  const std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  const CausalPredictor pred(net, bags, y);
  const auto est = pred.estimate(reps, 0, SamplingOptions{});
  for (double p : est.dist) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  for (int label : pred.predict(reps, SamplingOptions{})) CHECK(label == 0);

  // Zero epochs: the initialization, and repeatable predictions.
  ReadoutConfig cfg;
  cfg.hidden = 5;
  cfg.train.epochs = 0;
  cfg.warmup_epochs = 0;
  const auto a = train_readout(bags, y, 3, reps, cfg);
  const auto b = train_readout(bags, y, 3, reps, cfg);
  CHECK(a.net() == b.net());
  CHECK(CausalPredictor(a, bags, y).predict(reps, SamplingOptions{}) == CausalPredictor(b, bags, y).predict(reps, SamplingOptions{}));
}

TEST_CASE("ERM on a single class reaches 100%") {
  const auto x = random_inputs(30, 5, 46);
  const std::vector<int> y(30, 0);
  const auto m = train_erm(x, y, 1, {4}, TrainConfig{0.05, 8, 2, 1, 0.9, 0.0});
  CHECK(accuracy(predict_labels(m, x), y) == 1.0);
}

TEST_CASE("ERM is deterministic in its seed") {
  const auto x = random_inputs(40, 5, 47);
  const auto y = random_labels(40, 3, 48);
  const TrainConfig cfg{0.05, 8, 3, 7, 0.9, 0.0};
  CHECK(train_erm(x, y, 3, {6}, cfg) == train_erm(x, y, 3, {6}, cfg));
}

TEST_CASE("checkpoint round trip and errors") {
  Mlp a({5, 4, 3}, Activation::kRelu, Activation::kIdentity, 49);
  Mlp b({3, 2}, Activation::kTanh, Activation::kSigmoid, 50);
  const auto path = temp_path("model.ckpt");
  save_checkpoint(path, {&a, &b}, 0xfeed);
  const auto ck = load_checkpoint(path, {{5, 4, 3}, {3, 2}});
  CHECK(ck.config_hash == 0xfeed);
  REQUIRE(ck.models.size() == 2);
  CHECK(ck.models[0] == a);
  CHECK(ck.models[1] == b);
  CHECK(code_of([&] { load_checkpoint(path, {{5, 4, 3}, {3, 4}}); }) == ErrorCode::kShape);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto truncated = temp_path("truncated.ckpt");
  std::ofstream(truncated, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK(code_of([&] { load_checkpoint(truncated); }) == ErrorCode::kCorruptFile);

  auto versioned = bytes;
  versioned[8] = static_cast<char>(kCheckpointVersion + 1);
  const auto vpath = temp_path("version.ckpt");
  std::ofstream(vpath, std::ios::binary) << versioned;
  CHECK(code_of([&] { load_checkpoint(vpath); }) == ErrorCode::kVersion);

  auto garbage = bytes;
  garbage[0] = 'X';
  const auto gpath = temp_path("garbage.ckpt");
  std::ofstream(gpath, std::ios::binary) << garbage;
  CHECK(code_of([&] { load_checkpoint(gpath); }) == ErrorCode::kCorruptFile);
}

TEST_CASE("single model stream round trip") {
  Mlp a({4, 3, 2}, Activation::kSigmoid, Activation::kIdentity, 51);
  std::stringstream ss;
  write_mlp(ss, a);
  CHECK(read_mlp(ss) == a);
}

TEST_CASE("training rejects bad configs") {
  CHECK(code_of([] { TrainConfig{0.0, 8, 1, 0, 0.9, 0.0}.validate(); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { TrainConfig{0.1, 0, 1, 0, 0.9, 0.0}.validate(); }) == ErrorCode::kInvalidArgument);
}
