#include <array>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "tlab/error.hpp"
#include "tlab/scm.hpp"
#include "tlab/transport.hpp"

using namespace tlab;
using namespace tlab::transport;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

std::array<int, 4> table4(const scm::DiscreteScm& m, const std::string& var) {
  const auto& t = m.mechanism(var).table;
  REQUIRE(t.size() == 4);
  return {t[0], t[1], t[2], t[3]};
}

}  // namespace

TEST_CASE("BowPair association gap") {
  const auto pair = bow_pair();
  CHECK(pair.violations().empty());
  const auto gap = association_gap(pair);
  CHECK(std::abs(gap.per_x.at(1) - 0.8) <= 1e-12);
  CHECK(std::abs(gap.max_gap - 0.8) <= 1e-12);
  CHECK(gap.per_x.at(gap.argmax_x) == gap.max_gap);
  CHECK(gap.skipped_x.empty());

  // Independent check of the two conditionals at x = 1.
  const std::array<int, 4> fx{0, 1, 1, 0};
  const std::array<int, 4> fy{0, 1, 0, 1};
  const auto src = testing::bow_joint(0.5, 0.1, fx, fy);
  const auto tgt = testing::bow_joint(0.5, 0.9, fx, fy);
  const double p_src = src[1][1] / (src[1][0] + src[1][1]);
  const double p_tgt = tgt[1][1] / (tgt[1][0] + tgt[1][1]);
  CHECK(std::abs(p_src - 0.9) <= 1e-12);
  CHECK(std::abs(p_tgt - 0.1) <= 1e-12);
  CHECK(std::abs(gap.per_x.at(1) - std::abs(p_src - p_tgt)) <= 1e-12);
}

TEST_CASE("BowPair causal invariance") {
  const auto gap = causal_invariance_gap(bow_pair());
  CHECK(gap.max_gap <= 1e-12);
  for (int x = 0; x < 2; ++x) {
    CHECK(std::abs(scm::interventional_distribution(bow_pair().target(), {{"X", x}}, "Y").prob({1}) - 0.5) <= 1e-12);
  }
}

TEST_CASE("identical domains have no association gap") {
  const auto m = bow_demo();
  CHECK(association_gap(TransportPair(m, m)).max_gap == 0.0);
}

TEST_CASE("no association gap when f_Y ignores U_XY") {
  BowParams p;
  p.fx = {0, 1, 1, 0};
  p.fy = {0, 0, 1, 1};  // Y = X
  p.p_uxy = {0.5, 0.5};
  p.p_ux = {0.9, 0.1};
  auto target = p;
  target.p_ux = {0.1, 0.9};
  const TransportPair pair(make_bow_scm("s", p), make_bow_scm("t", target));
  CHECK(association_gap(pair).max_gap == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("property: causal invariance over random pairs") {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    BowShape shape;
    shape.x = 2 + static_cast<int>(s % 3);
    shape.y = 2 + static_cast<int>((s / 3) % 2);
    shape.uxy = 2 + static_cast<int>((s / 6) % 2);
    shape.ux = 2 + static_cast<int>((s / 12) % 2);
    const auto pair = random_transport_pair(s, shape);
    REQUIRE(pair.violations().empty());
    const auto gap = causal_invariance_gap(pair);
    for (const auto& [x, g] : gap.per_x) worst = std::max(worst, g);
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("association gap is symmetric") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto pair = random_transport_pair(500 + s);
    CHECK(association_gap(pair).max_gap == doctest::Approx(association_gap(pair.swapped()).max_gap).epsilon(1e-14));
  }
}

TEST_CASE("corrupted pair: validation error and nonzero gap") {
  const auto src = bow_demo();
  BowParams p;
  p.fx = {0, 1, 1, 0};
  p.fy = {1, 1, 1, 1};  // Y constant
  p.p_uxy = {0.5, 0.5};
  p.p_ux = {0.9, 0.1};
  const auto tgt = make_bow_scm("corrupt", p);
  CHECK(code_of([&] { TransportPair(src, tgt); }) == ErrorCode::kStructure);
  const auto pair = TransportPair::unchecked(src, tgt);
  CHECK(!pair.violations().empty());
  CHECK(causal_invariance_gap(pair).max_gap > 0.0);

  auto shifted = src;
  shifted.set_exogenous_probs("U_XY", {0.3, 0.7});
  CHECK(code_of([&] { TransportPair(src, shifted); }) == ErrorCode::kStructure);
}

TEST_CASE("non-identifiability witness on binary bow graph") {
  WitnessSearchOptions opts;
  opts.budget = 100000;
  opts.seed = 1;
  const auto w = nonidentifiability_witness({2, 2, 2, 2, true}, opts);
  CHECK(w.joint_tv <= 1e-9);
  CHECK(w.do_gap >= 0.1);
  CHECK(w.iterations_used <= opts.budget);

  const auto check = verify_witness(w.scm_a, w.scm_b);
  CHECK(check.same_graph);
  CHECK(check.joint_tv <= 1e-9);
  CHECK(check.do_gap >= 0.1);
  CHECK(std::abs(check.joint_tv - w.joint_tv) <= 1e-12);
  CHECK(std::abs(check.do_gap - w.do_gap) <= 1e-12);

  // Brute-force recomputation outside the enumeration engine.
  auto p1 = [](const scm::DiscreteScm& m, const char* u) {
    return m.exogenous()[*m.exogenous_index(u)].probs[1];
  };
  const auto ja = testing::bow_joint(p1(w.scm_a, "U_XY"), p1(w.scm_a, "U_X"), table4(w.scm_a, "X"), table4(w.scm_a, "Y"));
  const auto jb = testing::bow_joint(p1(w.scm_b, "U_XY"), p1(w.scm_b, "U_X"), table4(w.scm_b, "X"), table4(w.scm_b, "Y"));
  double tv = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) tv += 0.5 * std::abs(ja[x][y] - jb[x][y]);
  CHECK(tv <= 1e-9);
  double gap = 0.0;
  for (int x = 0; x < 2; ++x)
    gap = std::max(gap, std::abs(testing::bow_do_y1(p1(w.scm_a, "U_XY"), table4(w.scm_a, "Y"), x) -
                                 testing::bow_do_y1(p1(w.scm_b, "U_XY"), table4(w.scm_b, "Y"), x)));
  CHECK(gap >= 0.1);
}

TEST_CASE("witness search is deterministic and reports failures") {
  const auto a = nonidentifiability_witness({2, 2, 2, 2, true});
  const auto b = nonidentifiability_witness({2, 2, 2, 2, true});
  CHECK(a.scm_a == b.scm_a);
  CHECK(a.scm_b == b.scm_b);

  CHECK(code_of([] { nonidentifiability_witness({2, 2, 2, 2, false}); }) == ErrorCode::kStructurallyIdentifiable);
  CHECK(code_of([] { nonidentifiability_witness({1, 2, 2, 2, true}); }) == ErrorCode::kInvalidArgument);
  WitnessSearchOptions tiny;
  tiny.budget = 1;
  CHECK(code_of([&] { nonidentifiability_witness({2, 2, 2, 2, true}, tiny); }) == ErrorCode::kBudgetExhausted);
}

TEST_CASE("witness search on larger domains") {
  const auto w = nonidentifiability_witness({3, 2, 3, 2, true});
  const auto check = verify_witness(w.scm_a, w.scm_b);
  CHECK(check.joint_tv <= 1e-9);
  CHECK(check.do_gap >= 0.1);
}
