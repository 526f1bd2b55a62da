#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "tlab/error.hpp"
#include "tlab/estimand.hpp"
#include "tlab/scm.hpp"

using namespace tlab;
using namespace tlab::estimand;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

double tv(std::span<const double> a, std::span<const double> b) { return scm::total_variation(a, b); }

// Y = Z, W a noisy copy of the confounder.
scm::DiscreteScm deterministic_labeler() {
  scm::DiscreteScm m("labeler");
  m.add_exogenous("U_XY", {0.4, 0.6});
  m.add_exogenous("U_Z", {0.5, 0.5});
  m.add_variable("W", 2);
  m.add_variable("Z", 2);
  m.add_variable("Y", 2);
  m.set_mechanism("W", {}, {"U_XY"}, [](std::span<const int> in) { return in[0]; });
  m.set_mechanism("Z", {"W"}, {"U_Z"}, [](std::span<const int> in) { return in[0] ^ in[1]; });
  m.set_mechanism("Y", {"Z"}, {"U_XY"}, [](std::span<const int> in) { return in[0]; });
  return m;
}

std::vector<FactoredSample> full_pool(int z_size, int w_size) {
  std::vector<FactoredSample> pool;
  for (int z = 0; z < z_size; ++z)
    for (int w = 0; w < w_size; ++w) pool.push_back({z, w});
  return pool;
}

scm::DistTable uniform_prior(int z_size, int w_size) {
  const auto n = static_cast<std::size_t>(z_size * w_size);
  return scm::DistTable({"Z", "W"}, {z_size, w_size}, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

}  // namespace

TEST_CASE("structure check") {
  CHECK_NOTHROW(check_factored_structure(deterministic_labeler()));
  CHECK_NOTHROW(check_factored_structure(random_factored_scm(3)));
  auto m = deterministic_labeler();
  m.set_mechanism("Z", {"W"}, {"U_XY"}, [](std::span<const int> in) { return in[0] ^ in[1]; });
  CHECK(code_of([&] { check_factored_structure(m); }) == ErrorCode::kStructure);
  CHECK(code_of([&] { oracle_models_from_scm(m); }) == ErrorCode::kStructure);
}

TEST_CASE("oracle models") {
  const auto labeler = oracle_models_from_scm(deterministic_labeler());
  for (int z = 0; z < 2; ++z)
    for (int w = 0; w < 2; ++w) {
      const auto p = labeler.readout.predict(z, {1 - z, w});
      CHECK(p[static_cast<std::size_t>(z)] == 1.0);
    }
  CHECK(labeler.representation.prob(1, {1, 0}) == 1.0);
  Rng rng(1);
  CHECK(labeler.representation.sample({1, 0}, rng) == labeler.representation.sample({1, 1}, rng));

  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto m = random_factored_scm(s);
    const auto models = oracle_models_from_scm(m);
    const auto joint = scm::joint_distribution(m, {"Z", "W", "Y"});
    const auto zw = joint.marginal({"Z", "W"});
    for (int z = 0; z < m.domain("Z"); ++z)
      for (int w = 0; w < m.domain("W"); ++w) {
        if (zw.prob({z, w}) <= 0) continue;
        const auto c = scm::conditional(joint, "Y", {{"Z", z}, {"W", w}});
        const auto p = models.readout.predict(z, {0, w});
        CHECK(tv(c.probs(), p) <= 1e-12);
      }
  }
}

TEST_CASE("property: exact do-estimand equals mutilation over random conforming SCMs") {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto m = random_factored_scm(s, 4);
    const auto models = oracle_models_from_scm(m);
    const auto prior = scm::joint_distribution(m, {"Z", "W"});
    for (int z = 0; z < m.domain("Z"); ++z)
      for (int w = 0; w < m.domain("W"); ++w) {
        const auto est = exact_do_theorem1(models.representation, models.readout, {z, w}, prior);
        const auto truth = scm::interventional_distribution(m, {{"Z", z}, {"W", w}}, "Y");
        worst = std::max(worst, tv(est.dist, truth.probs()));
        CHECK(est.mode == EstimateMode::kExact);
      }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("exact do-estimand special cases") {
  const auto m = deterministic_labeler();
  const auto models = oracle_models_from_scm(m);
  const auto prior = scm::joint_distribution(m, {"Z", "W"});
  const auto est = exact_do_theorem1(models.representation, models.readout, {1, 0}, prior);
  CHECK(est.dist[1] == doctest::Approx(1.0).epsilon(1e-15));

  const auto r = random_factored_scm(42);
  const auto rm = oracle_models_from_scm(r);
  const int zs = r.domain("Z"), ws = r.domain("W");
  std::vector<double> point(static_cast<std::size_t>(zs * ws), 0.0);
  point[static_cast<std::size_t>(1 * ws + 0)] = 1.0;
  const scm::DistTable point_prior({"Z", "W"}, {zs, ws}, point);
  const auto single = exact_do_theorem1(rm.representation, rm.readout, {1, 0}, point_prior);
  CHECK(tv(single.dist, rm.readout.predict(1, {1, 0})) <= 1e-12);
}

TEST_CASE("property: proof-chain equalities") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto m = random_factored_scm(7000 + s, 4);
    for (int z = 0; z < m.domain("Z"); ++z) {
      const auto bd = backdoor_adjustment(m, z);
      const auto dz = scm::interventional_distribution(m, {{"Z", z}}, "Y");
      const auto mz = marginalized_adjustment(m, z);
      CHECK(tv(bd.probs(), dz.probs()) <= 1e-12);
      CHECK(tv(bd.probs(), mz.probs()) <= 1e-12);
      CHECK(tv(mz.probs(), dz.probs()) <= 1e-12);
    }
  }
  CHECK(code_of([] { backdoor_adjustment(random_factored_scm(1), 9); }) == ErrorCode::kDomain);
}

TEST_CASE("backdoor collapses without spurious dependence") {
  // W independent of Y given Z: Y reads only Z and its own noise.
  scm::DiscreteScm m("collapse");
  m.add_exogenous("U_XY", {0.3, 0.7});
  m.add_exogenous("U_Z", {0.2, 0.8});
  m.add_exogenous("U_Y", {0.6, 0.4});
  m.add_variable("W", 2);
  m.add_variable("Z", 2);
  m.add_variable("Y", 2);
  m.set_mechanism("W", {}, {"U_XY"}, [](std::span<const int> in) { return in[0]; });
  m.set_mechanism("Z", {"W"}, {"U_Z"}, [](std::span<const int> in) { return in[0] & in[1]; });
  m.set_mechanism("Y", {"Z"}, {"U_Y"}, [](std::span<const int> in) { return in[0] | in[1]; });
  const auto joint = scm::joint_distribution(m, {"Z", "Y"});
  for (int z = 0; z < 2; ++z)
    CHECK(tv(backdoor_adjustment(m, z).probs(), scm::conditional(joint, "Y", {{"Z", z}}).probs()) <= 1e-12);

  const auto single = random_factored_scm(5, FactoredSizes{3, 1, 2});
  const auto j = scm::joint_distribution(single, {"Z", "W", "Y"});
  for (int z = 0; z < 3; ++z) {
    if (j.marginal({"Z"}).prob({z}) <= 0) continue;
    CHECK(tv(backdoor_adjustment(single, z).probs(), scm::conditional(j, "Y", {{"Z", z}, {"W", 0}}).probs()) <= 1e-12);
  }
}

TEST_CASE("Monte Carlo: full coverage matches exact") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto m = random_factored_scm(300 + s);
    const auto models = oracle_models_from_scm(m);
    const int zs = m.domain("Z"), ws = m.domain("W");
    const auto pool = full_pool(zs, ws);
    MonteCarloOptions opts;
    opts.n_i = 1;
    opts.n_j = pool.size() * 3;
    opts.sampling = PoolSampling::kExhaustive;
    const auto exact = exact_do_theorem1(models.representation, models.readout, {0, 0}, uniform_prior(zs, ws));
    const auto mc = mc_do_estimate(models.representation, models.readout, {0, 0}, pool, opts);
    CHECK(tv(exact.dist, mc.dist) <= 1e-9);
    CHECK(mc.mode == EstimateMode::kMonteCarlo);

    auto reversed = pool;
    std::reverse(reversed.begin(), reversed.end());
    const auto mc_rev = mc_do_estimate(models.representation, models.readout, {0, 0}, reversed, opts);
    CHECK(tv(mc.dist, mc_rev.dist) <= 1e-12);
  }
}

TEST_CASE("Monte Carlo: error decays with n_j") {
  const auto m = random_factored_scm(11, FactoredSizes{3, 4, 3});
  const auto models = oracle_models_from_scm(m);
  const auto pool = full_pool(3, 4);
  const auto exact = exact_do_theorem1(models.representation, models.readout, {1, 2}, uniform_prior(3, 4));
  auto mad = [&](std::size_t nj) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      MonteCarloOptions opts;
      opts.n_i = 1;
      opts.n_j = nj;
      opts.seed = seed;
      const auto est = mc_do_estimate(models.representation, models.readout, {1, 2}, pool, opts);
      for (std::size_t y = 0; y < est.dist.size(); ++y) total += std::abs(est.dist[y] - exact.dist[y]);
    }
    return total / 20.0;
  };
  CHECK(mad(64) < mad(4));
}

TEST_CASE("Monte Carlo: threads, errors, single pass") {
  const auto m = random_factored_scm(12);
  const auto models = oracle_models_from_scm(m);
  const auto pool = full_pool(m.domain("Z"), m.domain("W"));
  MonteCarloOptions opts;
  opts.n_i = 7;
  opts.n_j = 33;
  opts.seed = 5;
  const auto a = mc_do_estimate(models.representation, models.readout, {1, 0}, pool, opts);
  opts.threads = 4;
  const auto b = mc_do_estimate(models.representation, models.readout, {1, 0}, pool, opts);
  CHECK(a.dist == b.dist);

  CHECK(code_of([&] { mc_do_estimate(models.representation, models.readout, {1, 0}, {}, opts); }) == ErrorCode::kPool);
  opts.n_j = 0;
  CHECK(code_of([&] { mc_do_estimate(models.representation, models.readout, {1, 0}, pool, opts); }) ==
        ErrorCode::kInvalidArgument);

  opts.n_i = opts.n_j = 1;
  const auto one = mc_do_estimate(models.representation, models.readout, {1, 0}, pool, opts);
  const auto idx = pool_draw(opts, 0, 0, pool.size());
  CHECK(tv(one.dist, models.readout.predict(1, pool[idx])) <= 1e-12);
}

TEST_CASE("Monte Carlo draws share a prefix across n_j") {
  MonteCarloOptions small, large;
  small.n_j = 4;
  large.n_j = 64;
  small.seed = large.seed = 9;
  for (std::size_t j = 0; j < 4; ++j) CHECK(pool_draw(small, 0, j, 100) == pool_draw(large, 0, j, 100));
}

TEST_CASE("predict_class tie-breaking and rescaling") {
  DoEstimate e;
  e.dist = {0.1, 0.7, 0.2};
  CHECK(predict_class(e) == 1);
  e.dist = {0.5, 0.5};
  CHECK(predict_class(e) == 0);
  e.dist = std::vector<double>(10, 0.1);
  CHECK(predict_class(e) == 0);
  std::vector<double> acc{0.3, 2.0, 2.0, 0.1};
  const int base = argmax_lowest(acc);
  for (double scale : {1e-6, 0.5, 3.0, 1e6}) {
    auto scaled = acc;
    for (auto& v : scaled) v *= scale;
    CHECK(argmax_lowest(scaled) == base);
  }
}

TEST_CASE("estimate CSV row") {
  DoEstimate e;
  e.dist = {0.25, 0.75};
  e.mode = EstimateMode::kMonteCarlo;
  e.n_i = 10;
  e.n_j = 256;
  e.seed = 3;
  std::ostringstream os;
  write_estimate_csv_header(os, 2);
  write_estimate_csv_row(os, "q0", e);
  CHECK(os.str() == "query_id,mode,n_i,n_j,seed,p0,p1,predicted\nq0,monte-carlo,10,256,3,0.25,0.75,1\n");
}
