#include "tlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tlab/error.hpp"
#include "tlab/linalg.hpp"
#include "tlab/random.hpp"

namespace tlab::transport {

using scm::Assignment;
using scm::DiscreteScm;
using scm::DistTable;

// ---------------------------------------------------------------------------
// Bow graph construction

DiscreteScm make_bow_scm(const std::string& name, const BowParams& p) {
  const BowShape& s = p.shape;
  DiscreteScm m(name);
  m.add_variable("X", s.x);
  m.add_variable("Y", s.y);
  m.add_exogenous("U_XY", p.p_uxy);
  m.add_exogenous("U_X", p.p_ux);
  if (s.confounded)
    m.set_mechanism("X", {{}, {"U_XY", "U_X"}, p.fx});
  else
    m.set_mechanism("X", {{}, {"U_X"}, p.fx});
  m.set_mechanism("Y", {{"X"}, {"U_XY"}, p.fy});
  return m;
}

DiscreteScm bow_demo(double p_ux) {
  BowParams p;
  p.shape = {2, 2, 2, 2, true};
  p.p_uxy = {0.5, 0.5};
  p.p_ux = {1.0 - p_ux, p_ux};
  p.fx = {0, 1, 1, 0};  // u_xy xor u_x
  p.fy = {0, 1, 0, 1};  // y = u_xy
  return make_bow_scm("BowDemo", p);
}

// ---------------------------------------------------------------------------
// TransportPair

namespace {

std::vector<std::string> pair_violations(const DiscreteScm& source, const DiscreteScm& target,
                                         const std::string& x, const std::string& y) {
  std::vector<std::string> out;
  for (const auto* m : {&source, &target}) {
    const scm::ValidationReport r = scm::validate_scm(*m);
    for (const auto& v : r.violations) out.push_back((m == &source ? "source: " : "target: ") + v.message);
  }
  if (!out.empty()) return out;
  if (source.variables() != target.variables()) out.push_back("source and target declare different endogenous variables");
  if (source.exogenous().size() != target.exogenous().size()) {
    out.push_back("source and target declare different exogenous variables");
  } else {
    for (std::size_t i = 0; i < source.exogenous().size(); ++i) {
      const auto& a = source.exogenous()[i];
      const auto& b = target.exogenous()[i];
      if (a.name != b.name || a.domain() != b.domain())
        out.push_back("exogenous '" + a.name + "' differs in name or domain across domains");
    }
  }
  if (!source.variable_index(x)) out.push_back("unknown treatment variable '" + x + "'");
  if (!source.variable_index(y)) out.push_back("unknown outcome variable '" + y + "'");
  if (!out.empty()) return out;

  std::set<std::string> shared_exo;
  for (std::size_t v = 0; v < source.variables().size(); ++v) {
    const std::string& name = source.variables()[v].name;
    if (name == x) continue;
    if (source.mechanisms()[v] != target.mechanisms()[v])
      out.push_back("mechanism of '" + name + "' differs between source and target");
    for (const std::string& e : source.mechanisms()[v].exogenous) shared_exo.insert(e);
    for (const std::string& e : target.mechanisms()[v].exogenous) shared_exo.insert(e);
  }
  for (const std::string& e : shared_exo) {
    if (source.exogenous()[*source.exogenous_index(e)].probs != target.exogenous()[*target.exogenous_index(e)].probs)
      out.push_back("P(" + e + ") differs between source and target but '" + e + "' is read outside f_" + x);
  }
  return out;
}

std::vector<double> random_simplex(Rng& rng, int n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (double& v : p) {
    v = 0.05 + rng.uniform();
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<int> random_table(Rng& rng, std::size_t rows, int domain) {
  std::vector<int> t(rows);
  for (int& v : t) v = static_cast<int>(rng.index(static_cast<std::size_t>(domain)));
  return t;
}

}  // namespace

TransportPair::TransportPair(DiscreteScm source, DiscreteScm target, std::string x, std::string y)
    : source_(std::move(source)), target_(std::move(target)), x_(std::move(x)), y_(std::move(y)) {
  const std::vector<std::string> v = violations();
  if (!v.empty()) throw Error(ErrorCode::kStructure, "invalid transport pair: " + v.front());
}

TransportPair::TransportPair(Unchecked, DiscreteScm source, DiscreteScm target, std::string x, std::string y)
    : source_(std::move(source)), target_(std::move(target)), x_(std::move(x)), y_(std::move(y)) {}

TransportPair TransportPair::unchecked(DiscreteScm source, DiscreteScm target, std::string x, std::string y) {
  return TransportPair(Unchecked{}, std::move(source), std::move(target), std::move(x), std::move(y));
}

std::vector<std::string> TransportPair::violations() const {
  return pair_violations(source_, target_, x_, y_);
}

TransportPair TransportPair::swapped() const { return unchecked(target_, source_, x_, y_); }

TransportPair bow_pair() {
  DiscreteScm target = bow_demo(0.9);
  target.set_name("BowDemoTarget");
  return TransportPair(bow_demo(0.1), std::move(target));
}

TransportPair random_transport_pair(std::uint64_t seed, const BowShape& shape) {
  Rng rng(seed);
  BowParams src;
  src.shape = shape;
  src.p_uxy = random_simplex(rng, shape.uxy);
  src.p_ux = random_simplex(rng, shape.ux);
  const auto fx_rows = static_cast<std::size_t>(shape.confounded ? shape.uxy * shape.ux : shape.ux);
  src.fx = random_table(rng, fx_rows, shape.x);
  src.fy = random_table(rng, static_cast<std::size_t>(shape.x * shape.uxy), shape.y);
  BowParams tgt = src;
  tgt.p_ux = random_simplex(rng, shape.ux);
  tgt.fx = random_table(rng, fx_rows, shape.x);
  return TransportPair(make_bow_scm("RandomSource", src), make_bow_scm("RandomTarget", tgt));
}

// ---------------------------------------------------------------------------
// Gaps

GapReport association_gap(const TransportPair& pair) {
  GapReport report;
  const DistTable js = scm::joint_distribution(pair.source(), {pair.x(), pair.y()});
  const DistTable jt = scm::joint_distribution(pair.target(), {pair.x(), pair.y()});
  const DistTable ms = js.marginal({pair.x()});
  const DistTable mt = jt.marginal({pair.x()});
  const int nx = pair.source().domain(pair.x());
  for (int x = 0; x < nx; ++x) {
    if (!(ms.prob({x}) > 0.0) || !(mt.prob({x}) > 0.0)) {
      report.skipped_x.push_back(x);
      continue;
    }
    const Assignment given{{pair.x(), x}};
    const double gap = scm::total_variation(scm::conditional(js, pair.y(), given),
                                            scm::conditional(jt, pair.y(), given));
    report.per_x[x] = gap;
    if (report.argmax_x < 0 || gap > report.max_gap) {
      report.max_gap = gap;
      report.argmax_x = x;
    }
  }
  return report;
}

GapReport causal_invariance_gap(const TransportPair& pair) {
  GapReport report;
  const int nx = pair.source().domain(pair.x());
  for (int x = 0; x < nx; ++x) {
    const Assignment intervention{{pair.x(), x}};
    const double gap =
        scm::total_variation(scm::interventional_distribution(pair.source(), intervention, pair.y()),
                             scm::interventional_distribution(pair.target(), intervention, pair.y()));
    report.per_x[x] = gap;
    if (report.argmax_x < 0 || gap > report.max_gap) {
      report.max_gap = gap;
      report.argmax_x = x;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Non-identifiability witness search

namespace {

// Closed-form P(X,Y) and P(Y|do(X)) for bow parameters. Kept separate from
// scm-core so the final verification is an independent computation.
struct BowTables {
  std::vector<double> joint;  // |X| x |Y|
  std::vector<double> do_y;   // |X| x |Y|
};

BowTables bow_tables(const BowParams& p) {
  const BowShape& s = p.shape;
  BowTables t;
  t.joint.assign(static_cast<std::size_t>(s.x * s.y), 0.0);
  t.do_y.assign(static_cast<std::size_t>(s.x * s.y), 0.0);
  for (int u = 0; u < s.uxy; ++u) {
    for (int v = 0; v < s.ux; ++v) {
      const int x = p.fx[static_cast<std::size_t>(u * s.ux + v)];
      const int y = p.fy[static_cast<std::size_t>(x * s.uxy + u)];
      t.joint[static_cast<std::size_t>(x * s.y + y)] += p.p_uxy[static_cast<std::size_t>(u)] * p.p_ux[static_cast<std::size_t>(v)];
    }
    for (int x = 0; x < s.x; ++x) {
      const int y = p.fy[static_cast<std::size_t>(x * s.uxy + u)];
      t.do_y[static_cast<std::size_t>(x * s.y + y)] += p.p_uxy[static_cast<std::size_t>(u)];
    }
  }
  return t;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (double& v : p) v /= sum;
  return p;
}

// Continuous parameters of both candidate SCMs: the logits of P_A(U_XY),
// P_A(U_X), P_B(U_XY), P_B(U_X), concatenated.
struct Candidate {
  BowParams a;
  BowParams b;
  std::vector<double> theta;

  void apply() {
    const BowShape& s = a.shape;
    std::size_t o = 0;
    auto take = [&](int n) {
      std::span<const double> seg(theta.data() + o, static_cast<std::size_t>(n));
      o += static_cast<std::size_t>(n);
      return softmax(seg);
    };
    a.p_uxy = take(s.uxy);
    a.p_ux = take(s.ux);
    b.p_uxy = take(s.uxy);
    b.p_ux = take(s.ux);
  }

  // Joint mismatch, dropping the last cell (it is implied by normalization).
  std::vector<double> residual() {
    apply();
    const std::vector<double> ja = bow_tables(a).joint;
    const std::vector<double> jb = bow_tables(b).joint;
    std::vector<double> r(ja.size() - 1);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = ja[i] - jb[i];
    return r;
  }
};

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Damped Gauss-Newton projection onto {theta : P_A(X,Y) = P_B(X,Y)} using the
// minimum-norm step. Each step costs one unit of budget.
bool project(Candidate& c, std::uint64_t& used, std::uint64_t budget, double tol) {
  const std::size_t n = c.theta.size();
  std::vector<double> r = c.residual();
  double lambda = 1e-6;
  for (int step = 0; step < 60; ++step) {
    if (max_abs(r) <= tol) return true;
    if (used >= budget) return false;
    ++used;
    const std::size_t m = r.size();
    std::vector<double> jac(m * n);
    const double h = 1e-6;
    for (std::size_t k = 0; k < n; ++k) {
      const double keep = c.theta[k];
      c.theta[k] = keep + h;
      const std::vector<double> up = c.residual();
      c.theta[k] = keep - h;
      const std::vector<double> dn = c.residual();
      c.theta[k] = keep;
      for (std::size_t i = 0; i < m; ++i) jac[i * n + k] = (up[i] - dn[i]) / (2 * h);
    }
    bool improved = false;
    for (int attempt = 0; attempt < 8 && !improved; ++attempt) {
      std::vector<double> jjt(m * m, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < n; ++k) s += jac[i * n + k] * jac[j * n + k];
          jjt[i * m + j] = s + (i == j ? lambda : 0.0);
        }
      auto y = linalg::solve(jjt, r);
      if (!y) {
        lambda *= 100.0;
        continue;
      }
      std::vector<double> trial = c.theta;
      for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += jac[i * n + k] * (*y)[i];
        trial[k] -= s;
      }
      std::swap(trial, c.theta);
      const std::vector<double> r_new = c.residual();
      if (norm2(r_new) < norm2(r)) {
        r = r_new;
        lambda = std::max(lambda * 0.1, 1e-14);
        improved = true;
      } else {
        std::swap(trial, c.theta);
        lambda *= 100.0;
      }
    }
    if (!improved) break;
    if (std::any_of(c.theta.begin(), c.theta.end(), [](double t) { return std::abs(t) > 40.0; })) break;
  }
  c.residual();
  return max_abs(r) <= tol;
}

struct Score {
  double do_gap = 0.0;
  int argmax_x = -1;
  double min_x_mass = 0.0;
};

Score score(const Candidate& c) {
  const BowShape& s = c.a.shape;
  const BowTables ta = bow_tables(c.a);
  const BowTables tb = bow_tables(c.b);
  Score out;
  out.min_x_mass = 1.0;
  for (int x = 0; x < s.x; ++x) {
    double gap = 0.0;
    double mass = 0.0;
    for (int y = 0; y < s.y; ++y) {
      const std::size_t i = static_cast<std::size_t>(x * s.y + y);
      gap += std::abs(ta.do_y[i] - tb.do_y[i]);
      mass += ta.joint[i];
    }
    gap *= 0.5;
    if (out.argmax_x < 0 || gap > out.do_gap) {
      out.do_gap = gap;
      out.argmax_x = x;
    }
    out.min_x_mass = std::min(out.min_x_mass, mass);
  }
  return out;
}

}  // namespace

NonIdWitness nonidentifiability_witness(const BowShape& shape, const WitnessSearchOptions& options) {
  if (shape.x < 2 || shape.y < 2 || shape.ux < 1 || shape.uxy < 1)
    throw Error(ErrorCode::kInvalidArgument, "witness search needs |X| >= 2, |Y| >= 2 and nonempty exogenous domains");
  if (options.budget < 1) throw Error(ErrorCode::kInvalidArgument, "witness search budget must be >= 1");
  if (!shape.confounded || shape.uxy < 2) {
    // Without a live confounder P(Y|do(X=x)) = P(Y|X=x) for every SCM on the
    // graph, so no witness exists.
    throw Error(ErrorCode::kStructurallyIdentifiable,
                "P(Y|do(X)) is identifiable: X and Y share no exogenous variable");
  }

  Rng rng(options.seed);
  std::uint64_t used = 0;
  const double tol = std::min(options.joint_tolerance, 1e-12);
  const std::size_t n_theta = static_cast<std::size_t>(2 * (shape.uxy + shape.ux));
  while (used < options.budget) {
    ++used;
    Candidate c;
    for (BowParams* p : {&c.a, &c.b}) {
      p->shape = shape;
      p->fx = random_table(rng, static_cast<std::size_t>(shape.uxy * shape.ux), shape.x);
      p->fy = random_table(rng, static_cast<std::size_t>(shape.x * shape.uxy), shape.y);
    }
    c.theta.resize(n_theta);
    for (double& t : c.theta) t = 1.5 * rng.normal();
    if (!project(c, used, options.budget, tol)) continue;
    Score best = score(c);
    if (best.min_x_mass < options.min_x_mass) continue;

    // Local refinement: perturb, re-project, keep improvements in do_gap.
    for (int round = 0; round < 20 && best.do_gap < options.min_do_gap && used < options.budget; ++round) {
      Candidate trial = c;
      for (double& t : trial.theta) t += 0.5 * rng.normal();
      if (!project(trial, used, options.budget, tol)) continue;
      const Score s = score(trial);
      if (s.min_x_mass >= options.min_x_mass && s.do_gap > best.do_gap) {
        c = std::move(trial);
        best = s;
      }
    }
    if (best.do_gap < options.min_do_gap) continue;

    c.apply();
    NonIdWitness w;
    w.scm_a = make_bow_scm("WitnessA", c.a);
    w.scm_b = make_bow_scm("WitnessB", c.b);
    const WitnessCheck check = verify_witness(w.scm_a, w.scm_b);
    if (!(check.joint_tv <= options.joint_tolerance) || check.do_gap < options.min_do_gap) continue;
    w.joint_tv = check.joint_tv;
    w.do_gap = check.do_gap;
    w.argmax_x = best.argmax_x;
    w.iterations_used = used;
    return w;
  }
  throw Error(ErrorCode::kBudgetExhausted,
              "no non-identifiability witness found within " + std::to_string(options.budget) + " iterations");
}

WitnessCheck verify_witness(const DiscreteScm& a, const DiscreteScm& b, const std::string& x, const std::string& y) {
  WitnessCheck out;
  out.same_graph = a.variables() == b.variables() && a.exogenous().size() == b.exogenous().size();
  if (out.same_graph) {
    for (std::size_t i = 0; i < a.exogenous().size(); ++i)
      out.same_graph = out.same_graph && a.exogenous()[i].name == b.exogenous()[i].name &&
                       a.exogenous()[i].domain() == b.exogenous()[i].domain();
    for (std::size_t v = 0; v < a.mechanisms().size(); ++v)
      out.same_graph = out.same_graph && a.mechanisms()[v].parents == b.mechanisms()[v].parents &&
                       a.mechanisms()[v].exogenous == b.mechanisms()[v].exogenous;
  }
  out.joint_tv = scm::total_variation(scm::joint_distribution(a, {x, y}), scm::joint_distribution(b, {x, y}));
  const int nx = a.domain(x);
  for (int v = 0; v < nx; ++v) {
    const Assignment intervention{{x, v}};
    out.do_gap = std::max(out.do_gap, scm::total_variation(scm::interventional_distribution(a, intervention, y),
                                                           scm::interventional_distribution(b, intervention, y)));
  }
  return out;
}

}  // namespace tlab::transport
