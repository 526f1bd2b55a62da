#pragma once

#include <cstdint>
#include <vector>

#include "tlab/mlp.hpp"
#include "tlab/random.hpp"

namespace tlab::neural {

struct VaeConfig {
  std::size_t latent_dim = 32;
  std::size_t hidden = 128;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  // Standard deviation of the Gaussian decoder.
  double obs_sigma = 0.1;

  void validate() const;
};

// Gaussian encoder q(r|x) = N(mu(x), diag(exp(logvar(x)))), standard normal
// prior, Gaussian decoder with fixed sigma and sigmoid mean.
class VaeModel {
 public:
  VaeModel() = default;
  VaeModel(std::size_t input_dim, const VaeConfig& config);
  VaeModel(Mlp encoder, Mlp decoder, double obs_sigma);

  std::size_t input_dim() const { return encoder_.input_dim(); }
  std::size_t latent_dim() const { return encoder_.output_dim() / 2; }
  double obs_sigma() const { return sigma_; }
  const Mlp& encoder() const { return encoder_; }
  const Mlp& decoder() const { return decoder_; }
  Mlp& encoder() { return encoder_; }
  Mlp& decoder() { return decoder_; }

  void encode(const Tensor& x, Tensor& mean, Tensor& logvar) const;
  Tensor decode(const Tensor& r) const;

  // Mean per-sample ELBO with one reparameterized draw per sample.
  double elbo(const Tensor& x, std::uint64_t seed) const;

  bool operator==(const VaeModel&) const = default;

 private:
  Mlp encoder_;
  Mlp decoder_;
  double sigma_ = 0.1;
};

struct VaeEpochLog {
  std::size_t epoch = 0;
  // Mean per-sample ELBO over the epoch's mini-batches.
  double elbo = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

// Finite-difference check of the negative-ELBO gradients of one batch, with
// the reparameterization noise fixed by `seed`. Same error measure and
// sampling as grad_check.
double vae_grad_check(const VaeModel& vae, const Tensor& x, std::uint64_t seed, double eps,
                      std::size_t max_per_tensor = 0, const std::function<void(Gradients&)>& tamper = {});

// Maximizes the ELBO with Adam. Throws kTraining with the epoch index if the
// loss becomes non-finite.
VaeModel train_vae(const Tensor& images, const VaeConfig& config, std::vector<VaeEpochLog>* log = nullptr);

}  // namespace tlab::neural
