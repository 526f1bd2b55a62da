#include <cmath>

#include "doctest.h"
#include "tlab/harness.hpp"

using namespace tlab;
using namespace tlab::harness;

namespace {

double only(const MetricsRecord& rec, Method m, double MethodMetrics::* field) {
  const auto v = rec.values(m, field);
  REQUIRE(v.size() == 1);
  return v[0];
}

}  // namespace

TEST_CASE("composed predictor at n_i = n_j = 1 is far above chance on train") {
  const auto c = parse_config(R"(kind = cmnist
seeds = 0
methods = ablation
vae.epochs = 5
readout.epochs = 20
readout.warmup = 10
)");
  const auto rec = run_experiment(c);
  CHECK(only(rec, Method::kAblation, &MethodMetrics::train_accuracy) >= 0.10 + 0.40);
}

TEST_CASE("a pure-noise representation gives no OOD gain over ERM") {
  const auto c = parse_config(R"(kind = cmnist
seeds = 0
methods = erm, ours
train.lr = 0.02
train.epochs = 60
representation = noise
readout.epochs = 20
readout.warmup = 10
nj = 64
)");
  const auto rec = run_experiment(c);
  const double erm = only(rec, Method::kErm, &MethodMetrics::ood_accuracy);
  const double ours = only(rec, Method::kOurs, &MethodMetrics::ood_accuracy);
  MESSAGE("ERM OOD " << erm << ", noise-representation OOD " << ours);
  CHECK(ours <= erm + 0.05);
}

TEST_CASE("foreground-only WaterBird closes the ERM OOD gap") {
  const auto c = parse_config(R"(kind = waterbird
seeds = 0
methods = erm
dataset.foreground_only = true
train.lr = 0.01
train.epochs = 80
)");
  const auto rec = run_experiment(c);
  const double id = only(rec, Method::kErm, &MethodMetrics::test_accuracy);
  const double ood = only(rec, Method::kErm, &MethodMetrics::ood_accuracy);
  MESSAGE("ERM in-distribution " << id << ", OOD " << ood);
  CHECK(std::abs(id - ood) <= 0.05);
}
