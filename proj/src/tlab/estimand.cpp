#include "tlab/estimand.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace tlab::estimand {

using scm::Assignment;
using scm::DiscreteScm;
using scm::DistTable;

namespace {

std::vector<double> random_simplex(Rng& rng, int n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (double& v : p) sum += (v = 0.05 + rng.uniform());
  for (double& v : p) v /= sum;
  return p;
}

int random_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo + 1))); }

struct Resolved {
  int z_size;
  int w_size;
  int y_size;
};

Resolved resolve(const DiscreteScm& scm, const FactoredNames& names) {
  check_factored_structure(scm, names);
  return {scm.domain(names.z), scm.domain(names.w), scm.domain(names.y)};
}

// P(y | z, w′) from the observational joint when (z, w′) has mass, else the
// structural definition.
std::vector<double> adjustment_conditional(const DiscreteScm& scm, const DistTable& joint_zwy, int z, int w,
                                           const FactoredNames& names) {
  const DistTable zw = joint_zwy.marginal({names.z, names.w});
  if (zw.prob({z, w}) > 0.0) {
    return scm::conditional(joint_zwy, names.y, Assignment{{names.z, z}, {names.w, w}}).probs();
  }
  return structural_conditional(scm, z, w, names);
}

}  // namespace

void check_factored_structure(const DiscreteScm& scm, const FactoredNames& names) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kStructure, "decomposed-input graph: " + msg); };
  const scm::ValidationReport report = scm::validate_scm(scm);
  if (!report.ok()) fail(report.violations.front().message);
  if (scm.variables().size() != 3) fail("expected exactly three endogenous variables");
  for (const std::string* n : {&names.z, &names.w, &names.y})
    if (!scm.variable_index(*n)) fail("missing variable '" + *n + "'");
  const scm::Mechanism& mw = scm.mechanism(names.w);
  const scm::Mechanism& mz = scm.mechanism(names.z);
  const scm::Mechanism& my = scm.mechanism(names.y);
  if (!mw.parents.empty()) fail("'" + names.w + "' must have no endogenous parents");
  for (const std::string& p : mz.parents)
    if (p != names.w) fail("'" + names.z + "' may only read '" + names.w + "'");
  for (const std::string& p : my.parents)
    if (p != names.z) fail("'" + names.y + "' may only read '" + names.z + "'");
  for (const std::string& e : mz.exogenous) {
    const bool shared = std::find(mw.exogenous.begin(), mw.exogenous.end(), e) != mw.exogenous.end() ||
                        std::find(my.exogenous.begin(), my.exogenous.end(), e) != my.exogenous.end();
    if (shared) fail("exogenous '" + e + "' of '" + names.z + "' is shared; '" + names.z + "' must be unconfounded");
  }
}

DiscreteScm random_factored_scm(std::uint64_t seed, const FactoredSizes& sizes) {
  Rng rng(seed);
  DiscreteScm m("RandomFactored");
  m.add_variable("W", sizes.w);
  m.add_variable("Z", sizes.z);
  m.add_variable("Y", sizes.y);
  m.add_exogenous("U_XY", random_simplex(rng, random_int(rng, 2, 3)));
  m.add_exogenous("U_W", random_simplex(rng, 2));
  m.add_exogenous("U_Z", random_simplex(rng, 2));
  m.add_exogenous("U_Y", random_simplex(rng, 2));
  auto table = [&rng](int domain) {
    return [&rng, domain](std::span<const int>) { return static_cast<int>(rng.index(static_cast<std::size_t>(domain))); };
  };
  m.set_mechanism("W", {}, {"U_XY", "U_W"}, table(sizes.w));
  m.set_mechanism("Z", {"W"}, {"U_Z"}, table(sizes.z));
  m.set_mechanism("Y", {"Z"}, {"U_XY", "U_Y"}, table(sizes.y));
  return m;
}

DiscreteScm random_factored_scm(std::uint64_t seed, int max_domain) {
  Rng rng(derive_seed(seed, {0x51e}));
  FactoredSizes s;
  s.z = random_int(rng, 2, max_domain);
  s.w = random_int(rng, 1, max_domain);
  s.y = random_int(rng, 2, max_domain);
  return random_factored_scm(seed, s);
}

std::vector<double> OracleReadout::predict(int r, FactoredSample x_prime) const {
  if (r < 0 || r >= z_size_ || x_prime.w < 0 || x_prime.w >= w_size_)
    throw Error(ErrorCode::kDomain, "oracle readout queried outside its tables");
  const auto begin = table_.begin() + static_cast<std::ptrdiff_t>((r * w_size_ + x_prime.w) * y_size_);
  return {begin, begin + y_size_};
}

std::vector<double> structural_conditional(const DiscreteScm& scm, int z, int w, const FactoredNames& names) {
  const Resolved s = resolve(scm, names);
  if (z < 0 || z >= s.z_size) throw Error(ErrorCode::kDomain, "z outside domain");
  if (w < 0 || w >= s.w_size) throw Error(ErrorCode::kDomain, "w outside domain");
  const DiscreteScm forced = scm::mutilate(scm, {{names.z, z}});
  const std::size_t wi = *scm.variable_index(names.w);
  const std::size_t yi = *scm.variable_index(names.y);
  std::vector<double> given_w(static_cast<std::size_t>(s.y_size), 0.0);
  std::vector<double> overall(static_cast<std::size_t>(s.y_size), 0.0);
  double mass = 0.0;
  scm::for_each_world(forced, [&](double p, std::span<const int> endo) {
    overall[static_cast<std::size_t>(endo[yi])] += p;
    if (endo[wi] == w) {
      given_w[static_cast<std::size_t>(endo[yi])] += p;
      mass += p;
    }
  });
  if (!(mass > 0.0)) return overall;
  for (double& v : given_w) v /= mass;
  return given_w;
}

OracleModels oracle_models_from_scm(const DiscreteScm& scm, const FactoredNames& names) {
  const Resolved s = resolve(scm, names);
  std::vector<double> table;
  table.reserve(static_cast<std::size_t>(s.z_size * s.w_size * s.y_size));
  for (int z = 0; z < s.z_size; ++z)
    for (int w = 0; w < s.w_size; ++w) {
      const std::vector<double> p = structural_conditional(scm, z, w, names);
      table.insert(table.end(), p.begin(), p.end());
    }
  return {OracleRepresentation(s.z_size), OracleReadout(s.z_size, s.w_size, s.y_size, std::move(table))};
}

const char* estimate_mode_name(EstimateMode mode) {
  return mode == EstimateMode::kExact ? "exact" : "monte-carlo";
}

DoEstimate exact_do_theorem1(const RepresentationModel& rep, const ReadoutModel& readout, FactoredSample x,
                             const DistTable& x_prior) {
  if (x_prior.scope().size() != 2)
    throw Error(ErrorCode::kShape, "x prior must be a table over (Z, W)");
  const int nr = rep.num_values();
  const int ny = readout.num_labels();
  if (nr < 1 || ny < 1) throw Error(ErrorCode::kTooLarge, "representation or label support is not enumerable");
  if (static_cast<std::uint64_t>(nr) * x_prior.size() > scm::kMaxExogenousStates)
    throw Error(ErrorCode::kTooLarge, "do-estimand double sum exceeds the enumeration cap");
  const int zs = x_prior.domains()[0];
  const int ws = x_prior.domains()[1];
  DoEstimate est;
  est.mode = EstimateMode::kExact;
  est.dist.assign(static_cast<std::size_t>(ny), 0.0);
  for (int r = 0; r < nr; ++r) {
    const double pr = rep.prob(r, x);
    if (pr == 0.0) continue;
    for (int zp = 0; zp < zs; ++zp) {
      for (int wp = 0; wp < ws; ++wp) {
        const double px = x_prior.prob({zp, wp});
        if (px == 0.0) continue;
        const std::vector<double> py = readout.predict(r, {zp, wp});
        for (int y = 0; y < ny; ++y) est.dist[static_cast<std::size_t>(y)] += pr * px * py[static_cast<std::size_t>(y)];
      }
    }
  }
  double total = 0.0;
  for (double p : est.dist) total += p;
  if (!(std::abs(total - 1.0) <= 1e-9))
    throw Error(ErrorCode::kNumeric, "do-estimand sum is not normalized; check P̂(r|x) and the x prior");
  return est;
}

DistTable backdoor_adjustment(const DiscreteScm& scm, int z, const FactoredNames& names) {
  const Resolved s = resolve(scm, names);
  if (z < 0 || z >= s.z_size) throw Error(ErrorCode::kDomain, "z = " + std::to_string(z) + " outside domain");
  const DistTable joint = scm::joint_distribution(scm, {names.z, names.w, names.y});
  const DistTable pw = joint.marginal({names.w});
  std::vector<double> out(static_cast<std::size_t>(s.y_size), 0.0);
  for (int w = 0; w < s.w_size; ++w) {
    const double weight = pw.prob({w});
    if (weight == 0.0) continue;
    const std::vector<double> py = adjustment_conditional(scm, joint, z, w, names);
    for (int y = 0; y < s.y_size; ++y) out[static_cast<std::size_t>(y)] += py[static_cast<std::size_t>(y)] * weight;
  }
  return DistTable({names.y}, {s.y_size}, std::move(out));
}

DistTable marginalized_adjustment(const DiscreteScm& scm, int z, const FactoredNames& names) {
  const Resolved s = resolve(scm, names);
  if (z < 0 || z >= s.z_size) throw Error(ErrorCode::kDomain, "z = " + std::to_string(z) + " outside domain");
  const DistTable joint = scm::joint_distribution(scm, {names.z, names.w, names.y});
  const DistTable pzw = joint.marginal({names.z, names.w});
  std::vector<double> out(static_cast<std::size_t>(s.y_size), 0.0);
  for (int zp = 0; zp < s.z_size; ++zp) {
    for (int w = 0; w < s.w_size; ++w) {
      const double weight = pzw.prob({zp, w});
      if (weight == 0.0) continue;
      const std::vector<double> py = adjustment_conditional(scm, joint, z, w, names);
      for (int y = 0; y < s.y_size; ++y) out[static_cast<std::size_t>(y)] += py[static_cast<std::size_t>(y)] * weight;
    }
  }
  return DistTable({names.y}, {s.y_size}, std::move(out));
}

DoEstimate mc_do_estimate(const RepresentationModel& rep, const ReadoutModel& readout, FactoredSample x,
                          std::span<const FactoredSample> pool, const MonteCarloOptions& options) {
  const std::size_t ny = static_cast<std::size_t>(readout.num_labels());
  return mc_do_estimate([&](Rng& rng) { return rep.sample(x, rng); },
                        [&](int r, std::span<const std::size_t> idx, std::span<double> out) {
                          for (std::size_t j = 0; j < idx.size(); ++j) {
                            const std::vector<double> p = readout.predict(r, pool[idx[j]]);
                            std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(j * ny));
                          }
                        },
                        pool.size(), ny, options);
}

int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

void write_estimate_csv_header(std::ostream& out, std::size_t num_labels) {
  out << "query_id,mode,n_i,n_j,seed";
  for (std::size_t y = 0; y < num_labels; ++y) out << ",p" << y;
  out << ",predicted\n";
}

void write_estimate_csv_row(std::ostream& out, const std::string& query_id, const DoEstimate& est) {
  std::ostringstream row;
  row << std::setprecision(17) << query_id << "," << estimate_mode_name(est.mode) << "," << est.n_i << ","
      << est.n_j << "," << est.seed;
  for (double p : est.dist) row << "," << p;
  row << "," << predict_class(est) << "\n";
  out << row.str();
}

}  // namespace tlab::estimand
