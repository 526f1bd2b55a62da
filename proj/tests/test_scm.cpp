#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "tlab/error.hpp"
#include "tlab/random.hpp"
#include "tlab/scm.hpp"
#include "tlab/scm_io.hpp"
#include "tlab/transport.hpp"

using namespace tlab;
using namespace tlab::scm;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

DiscreteScm two_variable() {
  DiscreteScm m("two");
  m.add_exogenous("U", {0.3, 0.7});
  m.add_variable("A", 2);
  m.add_variable("B", 3);
  m.set_mechanism("A", {}, {"U"}, [](std::span<const int> in) { return in[0]; });
  m.set_mechanism("B", {"A"}, {}, [](std::span<const int> in) { return in[0] + 1; });
  return m;
}

// Random SCM over a random DAG with a handful of exogenous variables.
DiscreteScm random_scm(std::uint64_t seed) {
  Rng rng(seed);
  DiscreteScm m("random");
  const int n_exo = 1 + static_cast<int>(rng.index(3));
  for (int e = 0; e < n_exo; ++e) {
    const int d = 2 + static_cast<int>(rng.index(2));
    std::vector<double> p(static_cast<std::size_t>(d));
    double s = 0;
    for (auto& v : p) s += (v = 0.05 + rng.uniform());
    for (auto& v : p) v /= s;
    m.add_exogenous("U" + std::to_string(e), p);
  }
  const int n_var = 2 + static_cast<int>(rng.index(3));
  for (int v = 0; v < n_var; ++v) {
    const std::string name = "V" + std::to_string(v);
    m.add_variable(name, 1 + static_cast<int>(rng.index(3)));
    std::vector<std::string> parents;
    for (int p = 0; p < v; ++p)
      if (rng.bernoulli(0.5)) parents.push_back("V" + std::to_string(p));
    std::vector<std::string> exo;
    for (int e = 0; e < n_exo; ++e)
      if (rng.bernoulli(0.5)) exo.push_back("U" + std::to_string(e));
    Mechanism mech{parents, exo, {}};
    const std::size_t rows = *m.input_space_size(mech);
    const int d = m.domain(name);
    for (std::size_t r = 0; r < rows; ++r) mech.table.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(d))));
    m.set_mechanism(name, mech);
  }
  return m;
}

std::vector<std::string> endogenous_names(const DiscreteScm& m) {
  std::vector<std::string> names;
  for (const auto& v : m.variables()) names.push_back(v.name);
  return names;
}

}  // namespace

TEST_CASE("validate_scm accepts a well-formed model") {
  CHECK(validate_scm(two_variable()).ok());
}

TEST_CASE("validate_scm lists normalization and cycle violations") {
  auto m = two_variable();
  m.set_exogenous_probs("U", {0.3, 0.6});
  auto report = validate_scm(m);
  CHECK(report.has(ViolationKind::kNormalization));

  DiscreteScm cyc("cyc");
  cyc.add_variable("X", 2);
  cyc.add_variable("Y", 2);
  cyc.set_mechanism("X", Mechanism{{"Y"}, {}, {0, 1}});
  cyc.set_mechanism("Y", Mechanism{{"X"}, {}, {0, 1}});
  CHECK(validate_scm(cyc).has(ViolationKind::kCycle));

  DiscreteScm bad("bad");
  bad.add_variable("X", 2);
  bad.set_mechanism("X", Mechanism{{}, {}, {5}});
  CHECK(validate_scm(bad).has(ViolationKind::kValueOutOfDomain));
  bad.set_mechanism("X", Mechanism{{"Q"}, {}, {0}});
  CHECK(validate_scm(bad).has(ViolationKind::kUnknownInput));
}

TEST_CASE("BowDemo joint matches brute-force enumeration") {
  const auto m = transport::bow_demo();
  const auto px = joint_distribution(m, {"X"});
  CHECK(px.prob({1}) == doctest::Approx(0.5).epsilon(1e-12));

  const auto joint = joint_distribution(m, {"X", "Y"});
  // X = U_XY xor U_X, Y = U_XY.
  const auto oracle = testing::bow_joint(0.5, 0.1, {0, 1, 1, 0}, {0, 1, 0, 1});
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) CHECK(std::abs(joint.prob({x, y}) - oracle[x][y]) <= 1e-12);
  CHECK(std::abs(joint.prob({1, 1}) - 0.45) <= 1e-12);
  CHECK(std::abs(joint.prob({1, 0}) - 0.05) <= 1e-12);
  CHECK(std::abs(joint.prob({0, 1}) - 0.05) <= 1e-12);
  CHECK(std::abs(joint.prob({0, 0}) - 0.45) <= 1e-12);
  CHECK(std::abs(joint.total() - 1.0) <= 1e-12);
}

TEST_CASE("constant variable yields a point mass") {
  DiscreteScm m("const");
  m.add_variable("C", 3);
  m.set_mechanism("C", Mechanism{{}, {}, {2}});
  const auto t = joint_distribution(m, {"C"});
  CHECK(t.prob({2}) == 1.0);
  CHECK(t.prob({0}) == 0.0);
}

TEST_CASE("unknown query variable is a query error") {
  CHECK(code_of([] { joint_distribution(transport::bow_demo(), {"Q"}); }) == ErrorCode::kQuery);
}

TEST_CASE("conditionals on BowDemo") {
  const auto joint = joint_distribution(transport::bow_demo(), {"X", "Y"});
  const auto y_x1 = conditional(joint, "Y", {{"X", 1}});
  const auto y_x0 = conditional(joint, "Y", {{"X", 0}});
  CHECK(std::abs(y_x1.prob({1}) - 0.9) <= 1e-12);
  CHECK(std::abs(y_x0.prob({1}) - 0.1) <= 1e-12);
  CHECK(std::abs(y_x1.total() - 1.0) <= 1e-12);

  DiscreteScm m("zero");
  m.add_exogenous("U", {1.0, 0.0});
  m.add_variable("X", 2);
  m.set_mechanism("X", {}, {"U"}, [](std::span<const int> in) { return in[0]; });
  m.add_variable("Y", 2);
  m.set_mechanism("Y", Mechanism{{"X"}, {}, {0, 1}});
  const auto j = joint_distribution(m, {"X", "Y"});
  CHECK(code_of([&] { conditional(j, "Y", {{"X", 1}}); }) == ErrorCode::kUndefinedConditional);
}

TEST_CASE("interventions on BowDemo") {
  const auto m = transport::bow_demo();
  for (int x = 0; x < 2; ++x) {
    const auto t = interventional_distribution(m, {{"X", x}}, "Y");
    CHECK(std::abs(t.prob({1}) - testing::bow_do_y1(0.5, {0, 1, 0, 1}, x)) <= 1e-12);
    CHECK(std::abs(t.prob({1}) - 0.5) <= 1e-12);
  }
  CHECK(code_of([&] { interventional_distribution(m, {{"U_X", 0}}, "Y"); }) == ErrorCode::kInvalidIntervention);
  CHECK(code_of([&] { interventional_distribution(m, {{"X", 4}}, "Y"); }) == ErrorCode::kDomain);
}

TEST_CASE("sampling agrees with enumeration and is deterministic") {
  const auto m = transport::bow_demo();
  const auto rows = sample_dataset(m, 100000, 7);
  const auto emp = empirical_distribution(m, rows, {"X", "Y"});
  CHECK(std::abs(emp.prob({1, 1}) - 0.45) <= 0.01);
  CHECK(rows == sample_dataset(m, 100000, 7));
  CHECK(rows != sample_dataset(m, 100000, 8));
  CHECK(code_of([&] { sample_dataset(m, 0, 1); }) == ErrorCode::kInvalidArgument);

  DiscreteScm d("det");
  d.add_variable("A", 3);
  d.set_mechanism("A", Mechanism{{}, {}, {1}});
  d.add_variable("B", 2);
  d.set_mechanism("B", Mechanism{{"A"}, {}, {0, 0, 1}});
  const auto one = sample_dataset(d, 1, 3);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == std::vector<int>{1, 0});
}

TEST_CASE("property: normalization, sampling consistency, idempotence") {
  for (std::uint64_t s = 0; s < 40; ++s) {
    const auto m = random_scm(1000 + s);
    REQUIRE(validate_scm(m).ok());
    const auto names = endogenous_names(m);
    const auto joint = joint_distribution(m, names);
    CHECK(std::abs(joint.total() - 1.0) <= 1e-12);

    std::uint64_t states = 1;
    for (const auto& e : m.exogenous()) states *= static_cast<std::uint64_t>(e.domain());
    if (states <= 64) {
      const auto rows = sample_dataset(m, 100000, s);
      CHECK(total_variation(empirical_distribution(m, rows, names), joint) <= 0.02);
    }

    const std::string& first = names.front();
    const std::string& last = names.back();
    const Assignment a{{first, m.domain(first) - 1}};
    const auto once = interventional_distribution(m, a, last);
    const auto twice = joint_distribution(mutilate(mutilate(m, a), a), {last});
    CHECK(total_variation(once, twice) == 0.0);
    CHECK(std::abs(once.total() - 1.0) <= 1e-12);
  }
}

TEST_CASE("property: no-confounding collapse") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    transport::BowShape shape;
    shape.confounded = false;
    shape.x = 2 + static_cast<int>(s % 2);
    const auto pair = transport::random_transport_pair(s, shape);
    const auto& m = pair.source();
    const auto joint = joint_distribution(m, {"X", "Y"});
    const auto px = joint.marginal({"X"});
    for (int x = 0; x < shape.x; ++x) {
      if (px.prob({x}) <= 0) continue;
      const auto c = conditional(joint, "Y", {{"X", x}});
      const auto d = interventional_distribution(m, {{"X", x}}, "Y");
      for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c.probs()[i] - d.probs()[i]) <= 1e-12);
    }
  }
}

TEST_CASE("enumeration refuses oversized exogenous spaces") {
  DiscreteScm m("big");
  for (int e = 0; e < 25; ++e) m.add_exogenous("U" + std::to_string(e), {0.5, 0.5});
  m.add_variable("X", 2);
  m.set_mechanism("X", {}, {"U0"}, [](std::span<const int> in) { return in[0]; });
  CHECK(code_of([&] { joint_distribution(m, {"X"}); }) == ErrorCode::kTooLarge);
}

TEST_CASE("DistTable rejects unnormalized entries and exports CSV") {
  CHECK(code_of([] { DistTable({"A"}, {2}, {0.5, 0.4}); }) == ErrorCode::kNumeric);
  CHECK(code_of([] { DistTable({"A"}, {2}, {1.5, -0.5}); }) == ErrorCode::kNumeric);
  DistTable t({"A", "B"}, {2, 2}, {0.1, 0.2, 0.3, 0.4});
  CHECK(t.prob({1, 0}) == 0.3);
  CHECK(t.marginal({"B"}).prob({1}) == doctest::Approx(0.6));
  std::ostringstream os;
  t.write_csv(os);
  CHECK(os.str().rfind("A,B,probability\n0,0,0.1", 0) == 0);
}

TEST_CASE("SCM text format round-trips") {
  const auto m = random_scm(77);
  const auto text = format_scm(m);
  CHECK(parse_scm(text) == m);

  const auto path = std::filesystem::temp_directory_path() / "tlab_scm_roundtrip.scm";
  save_scm(transport::bow_demo(), path);
  CHECK(load_scm(path) == transport::bow_demo());
  std::filesystem::remove(path);
}

TEST_CASE("SCM loader rejects non-total tables") {
  const std::string text =
      "scm t\n"
      "variable X 2\n"
      "exogenous U 0.5 0.5\n"
      "mechanism X parents= exo=U\n"
      "parents=; exo=0; value=1\n"
      "end\n";
  CHECK(code_of([&] { parse_scm(text); }) == ErrorCode::kParse);
  const std::string dup = text.substr(0, text.size() - 4) + "parents=; exo=0; value=0\nend\n";
  CHECK(code_of([&] { parse_scm(dup); }) == ErrorCode::kParse);
  const std::string ok = text.substr(0, text.size() - 4) + "parents=; exo=1; value=0\nend\n";
  CHECK(parse_scm(ok).mechanism("X").table == std::vector<int>{1, 0});
}
