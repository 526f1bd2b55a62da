#include "tlab/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tlab::neural {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct BatchTerms {
  double reconstruction = 0.0;  // sum over batch of -log p(x|r)
  double kl = 0.0;              // sum over batch
};

// One reparameterized pass. When `enc_grads`/`dec_grads` are given, they
// accumulate gradients of the mean negative ELBO.
BatchTerms vae_pass(const VaeModel& vae, const Tensor& x, Rng& rng, Gradients* enc_grads, Gradients* dec_grads) {
  const std::size_t m = x.rows();
  const std::size_t d = x.cols();
  const std::size_t L = vae.latent_dim();
  const double s2 = vae.obs_sigma() * vae.obs_sigma();
  const double log_norm = static_cast<double>(d) * (std::log(vae.obs_sigma()) + 0.5 * kLog2Pi);

  Mlp::Cache enc_cache, dec_cache;
  const Tensor stats = vae.encoder().forward(x, enc_cache);
  Tensor eps({m, L});
  Tensor r({m, L});
  BatchTerms terms;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < L; ++k) {
      const double mu = stats.at(i, k);
      const double lv = stats.at(i, L + k);
      eps.at(i, k) = rng.normal();
      r.at(i, k) = mu + eps.at(i, k) * std::exp(0.5 * lv);
      terms.kl += 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv);
    }
  }
  const Tensor recon = vae.decoder().forward(r, dec_cache);
  for (std::size_t i = 0; i < m * d; ++i) {
    const double diff = recon[i] - x[i];
    terms.reconstruction += diff * diff / (2.0 * s2);
  }
  terms.reconstruction += static_cast<double>(m) * log_norm;
  if (!enc_grads) return terms;

  const double inv_m = 1.0 / static_cast<double>(m);
  Tensor g_recon({m, d});
  for (std::size_t i = 0; i < m * d; ++i) g_recon[i] = (recon[i] - x[i]) / s2 * inv_m;
  Tensor g_r;
  vae.decoder().backward(dec_cache, g_recon, *dec_grads, &g_r);
  Tensor g_stats({m, 2 * L});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < L; ++k) {
      const double mu = stats.at(i, k);
      const double lv = stats.at(i, L + k);
      const double sd = std::exp(0.5 * lv);
      g_stats.at(i, k) = g_r.at(i, k) + mu * inv_m;
      g_stats.at(i, L + k) = g_r.at(i, k) * eps.at(i, k) * 0.5 * sd + 0.5 * (std::exp(lv) - 1.0) * inv_m;
    }
  }
  vae.encoder().backward(enc_cache, g_stats, *enc_grads);
  return terms;
}

}  // namespace

void VaeConfig::validate() const {
  if (latent_dim < 1) throw Error(ErrorCode::kInvalidArgument, "latent_dim must be >= 1");
  if (hidden < 1) throw Error(ErrorCode::kInvalidArgument, "hidden width must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  if (!(obs_sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "obs_sigma must be positive");
}

VaeModel::VaeModel(std::size_t input_dim, const VaeConfig& config)
    : encoder_({input_dim, config.hidden, 2 * config.latent_dim}, Activation::kRelu, Activation::kIdentity,
               derive_seed(config.seed, {0xe1c})),
      decoder_({config.latent_dim, config.hidden, input_dim}, Activation::kRelu, Activation::kSigmoid,
               derive_seed(config.seed, {0xdec})),
      sigma_(config.obs_sigma) {}

VaeModel::VaeModel(Mlp encoder, Mlp decoder, double obs_sigma)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), sigma_(obs_sigma) {
  if (encoder_.output_dim() % 2 != 0 || decoder_.input_dim() != encoder_.output_dim() / 2 ||
      decoder_.output_dim() != encoder_.input_dim())
    throw Error(ErrorCode::kShape, "encoder and decoder shapes do not form a VAE");
}

void VaeModel::encode(const Tensor& x, Tensor& mean, Tensor& logvar) const {
  const Tensor stats = encoder_.forward(x);
  const std::size_t m = x.rows();
  const std::size_t L = latent_dim();
  mean = Tensor({m, L});
  logvar = Tensor({m, L});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < L; ++k) {
      mean.at(i, k) = stats.at(i, k);
      logvar.at(i, k) = stats.at(i, L + k);
    }
}

Tensor VaeModel::decode(const Tensor& r) const { return decoder_.forward(r); }

double VaeModel::elbo(const Tensor& x, std::uint64_t seed) const {
  Rng rng(seed);
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.rows(); start += 256) {
    const std::size_t end = std::min(x.rows(), start + 256);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto t = vae_pass(*this, gather_rows(x, idx), rng, nullptr, nullptr);
    total -= t.reconstruction + t.kl;
  }
  return total / static_cast<double>(x.rows());
}

double vae_grad_check(const VaeModel& vae, const Tensor& x, std::uint64_t seed, double eps, std::size_t max_per_tensor,
                      const std::function<void(Gradients&)>& tamper) {
  Gradients enc = vae.encoder().zero_gradients();
  Gradients dec = vae.decoder().zero_gradients();
  {
    Rng rng(seed);
    vae_pass(vae, x, rng, &enc, &dec);
  }
  if (tamper) tamper(enc);
  const std::size_t m = x.rows();
  const std::size_t d = x.cols();
  const std::size_t L = vae.latent_dim();
  // Same draw order as vae_pass.
  std::vector<long double> noise(m * L);
  {
    Rng rng(seed);
    for (auto& v : noise) v = rng.normal();
  }
  const long double s2 = static_cast<long double>(vae.obs_sigma()) * vae.obs_sigma();
  VaeModel probe = vae;
  // Mean negative ELBO without the constant normalizer.
  auto loss = [&](std::size_t, std::size_t) {
    const auto stats = reference_forward(probe.encoder(), x);
    std::vector<long double> r_ld(m * L);
    long double total = 0.0L;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < L; ++k) {
        const long double mu = stats[i * 2 * L + k];
        const long double lv = stats[i * 2 * L + L + k];
        r_ld[i * L + k] = mu + noise[i * L + k] * std::exp(0.5L * lv);
        total += 0.5L * (mu * mu + std::exp(lv) - 1.0L - lv);
      }
    }
    const auto mean = reference_forward(probe.decoder(), std::move(r_ld), m);
    for (std::size_t i = 0; i < m * d; ++i) {
      const long double diff = mean[i] - x[i];
      total += diff * diff / (2.0L * s2);
    }
    return total / static_cast<long double>(m);
  };
  std::vector<std::pair<Tensor*, const Tensor*>> params;
  for (std::size_t l = 0; l < probe.encoder().layers().size(); ++l) {
    params.emplace_back(&probe.encoder().layers()[l].weight, &enc.weight[l]);
    params.emplace_back(&probe.encoder().layers()[l].bias, &enc.bias[l]);
  }
  for (std::size_t l = 0; l < probe.decoder().layers().size(); ++l) {
    params.emplace_back(&probe.decoder().layers()[l].weight, &dec.weight[l]);
    params.emplace_back(&probe.decoder().layers()[l].bias, &dec.bias[l]);
  }
  return compare_gradients(params, loss, eps, max_per_tensor);
}

VaeModel train_vae(const Tensor& images, const VaeConfig& config, std::vector<VaeEpochLog>* log) {
  config.validate();
  if (images.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "no training images");
  VaeModel vae(images.cols(), config);
  Adam enc_opt(vae.encoder(), config.learning_rate);
  Adam dec_opt(vae.decoder(), config.learning_rate);
  Gradients enc_grads = vae.encoder().zero_gradients();
  Gradients dec_grads = vae.decoder().zero_gradients();
  const std::size_t n = images.rows();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {0x5af, epoch}));
    shuffle_rng.shuffle(order);
    Rng noise(derive_seed(config.seed, {0x401, epoch}));
    BatchTerms sum;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const Tensor batch = gather_rows(images, std::span<const std::size_t>(order.data() + start, end - start));
      enc_grads.zero();
      dec_grads.zero();
      const auto t = vae_pass(vae, batch, noise, &enc_grads, &dec_grads);
      if (!std::isfinite(t.reconstruction + t.kl))
        throw Error(ErrorCode::kTraining, "VAE loss became non-finite at epoch " + std::to_string(epoch));
      enc_opt.step(vae.encoder(), enc_grads);
      dec_opt.step(vae.decoder(), dec_grads);
      sum.reconstruction += t.reconstruction;
      sum.kl += t.kl;
    }
    if (log) {
      VaeEpochLog e;
      e.epoch = epoch;
      e.reconstruction = sum.reconstruction / static_cast<double>(n);
      e.kl = sum.kl / static_cast<double>(n);
      e.elbo = -(e.reconstruction + e.kl);
      log->push_back(e);
    }
  }
  return vae;
}

}  // namespace tlab::neural
