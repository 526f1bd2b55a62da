#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tlab/scm.hpp"

namespace tlab::transport {

// Domain sizes of the bow graph: U_XY feeds both X and Y, U_X feeds X only,
// and X -> Y.
struct BowShape {
  int x = 2;
  int y = 2;
  int uxy = 2;
  int ux = 2;
  // False models a graph without the shared exogenous parent.
  bool confounded = true;
};

// Concrete bow-graph parameters. `fx` is indexed by (u_xy, u_x), or by u_x
// alone when unconfounded, and `fy` by (x, u_xy); row-major with the last
// input fastest.
struct BowParams {
  BowShape shape;
  std::vector<int> fx;
  std::vector<int> fy;
  std::vector<double> p_uxy;
  std::vector<double> p_ux;
};

scm::DiscreteScm make_bow_scm(const std::string& name, const BowParams& params);

// U_XY ~ Bernoulli(0.5), U_X ~ Bernoulli(p_ux), X = U_XY xor U_X, Y = U_XY.
scm::DiscreteScm bow_demo(double p_ux = 0.1);

// Source/target SCMs that differ at most in X's mechanism and in exogenous
// variables read only by X's mechanism.
class TransportPair {
 public:
  // Throws kStructure when the shared-mechanism declaration does not hold.
  TransportPair(scm::DiscreteScm source, scm::DiscreteScm target, std::string x = "X",
                std::string y = "Y");

  // Skips validation. Used for negative controls.
  static TransportPair unchecked(scm::DiscreteScm source, scm::DiscreteScm target,
                                 std::string x = "X", std::string y = "Y");

  const scm::DiscreteScm& source() const { return source_; }
  const scm::DiscreteScm& target() const { return target_; }
  // Selector S: 0 = source, 1 = target.
  const scm::DiscreteScm& domain(int s) const { return s == 0 ? source_ : target_; }
  const std::string& x() const { return x_; }
  const std::string& y() const { return y_; }

  // Empty iff the pair satisfies the transport declaration.
  std::vector<std::string> violations() const;

  TransportPair swapped() const;

 private:
  struct Unchecked {};
  TransportPair(Unchecked, scm::DiscreteScm source, scm::DiscreteScm target, std::string x,
                std::string y);

  scm::DiscreteScm source_;
  scm::DiscreteScm target_;
  std::string x_;
  std::string y_;
};

// BowDemo source with P(U_X=1)=0.1 against a target with P*(U_X=1)=0.9.
TransportPair bow_pair();

// Random bow pair sharing f_Y and P(U_XY) but with independently drawn f_X
// and P(U_X) in the target.
TransportPair random_transport_pair(std::uint64_t seed, const BowShape& shape = {});

struct GapReport {
  std::map<int, double> per_x;
  double max_gap = 0.0;
  int argmax_x = -1;
  // x values without positive mass in both domains.
  std::vector<int> skipped_x;
};

// Per-x total variation between P(Y|X=x) and P*(Y|X=x).
GapReport association_gap(const TransportPair& pair);
// Per-x total variation between P(Y|do(X=x)) and P*(Y|do(X=x)).
GapReport causal_invariance_gap(const TransportPair& pair);

struct NonIdWitness {
  scm::DiscreteScm scm_a;
  scm::DiscreteScm scm_b;
  double joint_tv = 0.0;
  double do_gap = 0.0;
  int argmax_x = -1;
  std::uint64_t iterations_used = 0;
};

struct WitnessSearchOptions {
  std::uint64_t budget = 100000;
  std::uint64_t seed = 1;
  double min_do_gap = 0.1;
  double joint_tolerance = 1e-9;
  // Every x must carry at least this much mass, so witnesses are not
  // degenerate in X.
  double min_x_mass = 0.05;
};

// Randomized search for two bow SCMs with equal P(X,Y) but different
// P(Y|do(X)). Throws kStructurallyIdentifiable for unconfounded shapes and
// kBudgetExhausted if nothing is found within the budget.
NonIdWitness nonidentifiability_witness(const BowShape& shape, const WitnessSearchOptions& options = {});

struct WitnessCheck {
  double joint_tv = 0.0;
  double do_gap = 0.0;
  bool same_graph = false;
};

// Recomputes both witness quantities from scratch with scm-core enumeration.
WitnessCheck verify_witness(const scm::DiscreteScm& a, const scm::DiscreteScm& b,
                            const std::string& x = "X", const std::string& y = "Y");

}  // namespace tlab::transport
