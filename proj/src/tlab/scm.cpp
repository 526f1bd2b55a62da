#include "tlab/scm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "tlab/error.hpp"
#include "tlab/random.hpp"

namespace tlab::scm {

namespace {

struct InputRef {
  bool exogenous = false;
  std::size_t index = 0;
};

struct CompiledMechanism {
  std::vector<InputRef> inputs;
  std::vector<std::size_t> strides;
  const std::vector<int>* table = nullptr;
};

// Index-resolved form of a valid SCM, ready for repeated evaluation.
struct CompiledScm {
  std::vector<std::size_t> order;
  std::vector<CompiledMechanism> mechanisms;
  std::vector<const std::vector<double>*> exo_probs;
  std::uint64_t exo_states = 1;

  void evaluate(std::span<const int> exo_values, std::span<int> endo_values) const {
    for (std::size_t v : order) {
      const CompiledMechanism& m = mechanisms[v];
      std::size_t row = 0;
      for (std::size_t k = 0; k < m.inputs.size(); ++k) {
        const InputRef& in = m.inputs[k];
        const int value = in.exogenous ? exo_values[in.index] : endo_values[in.index];
        row += static_cast<std::size_t>(value) * m.strides[k];
      }
      endo_values[v] = (*m.table)[row];
    }
  }
};

// Kahn's algorithm over endogenous parent lists; returns nullopt on a cycle.
std::optional<std::vector<std::size_t>> topological_order(const DiscreteScm& scm) {
  const auto& vars = scm.variables();
  const std::size_t n = vars.size();
  std::vector<std::vector<std::size_t>> children(n);
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    for (const std::string& p : scm.mechanisms()[v].parents) {
      auto pi = scm.variable_index(p);
      if (!pi) continue;
      children[*pi].push_back(v);
      ++indegree[v];
    }
  }
  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  while (!ready.empty()) {
    // Lowest index first keeps the order deterministic and declaration-like.
    auto it = std::min_element(ready.begin(), ready.end());
    const std::size_t v = *it;
    ready.erase(it);
    order.push_back(v);
    for (std::size_t c : children[v])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

CompiledScm compile(const DiscreteScm& scm) {
  const ValidationReport report = validate_scm(scm);
  if (!report.ok()) {
    throw Error(ErrorCode::kStructure,
                "invalid SCM '" + scm.name() + "': " + report.violations.front().message);
  }
  CompiledScm c;
  c.order = *topological_order(scm);
  const auto& vars = scm.variables();
  c.mechanisms.resize(vars.size());
  for (std::size_t v = 0; v < vars.size(); ++v) {
    const Mechanism& m = scm.mechanisms()[v];
    CompiledMechanism& cm = c.mechanisms[v];
    std::vector<int> sizes;
    for (const std::string& p : m.parents) {
      cm.inputs.push_back({false, *scm.variable_index(p)});
      sizes.push_back(scm.domain(p));
    }
    for (const std::string& e : m.exogenous) {
      cm.inputs.push_back({true, *scm.exogenous_index(e)});
      sizes.push_back(scm.domain(e));
    }
    cm.strides.assign(sizes.size(), 1);
    for (std::size_t k = sizes.size(); k-- > 1;)
      cm.strides[k - 1] = cm.strides[k] * static_cast<std::size_t>(sizes[k]);
    cm.table = &m.table;
  }
  for (const Exogenous& e : scm.exogenous()) {
    c.exo_probs.push_back(&e.probs);
    if (e.domain() > 0 && c.exo_states > kMaxExogenousStates / static_cast<std::uint64_t>(e.domain())) {
      c.exo_states = kMaxExogenousStates + 1;
    } else {
      c.exo_states *= static_cast<std::uint64_t>(e.domain());
    }
  }
  return c;
}

std::vector<std::size_t> resolve_query(const DiscreteScm& scm,
                                       const std::vector<std::string>& vars) {
  std::vector<std::size_t> idx;
  std::set<std::string> seen;
  for (const std::string& name : vars) {
    auto i = scm.variable_index(name);
    if (!i) throw Error(ErrorCode::kQuery, "unknown endogenous variable '" + name + "'");
    if (!seen.insert(name).second)
      throw Error(ErrorCode::kQuery, "variable '" + name + "' queried twice");
    idx.push_back(*i);
  }
  return idx;
}

}  // namespace

// ---------------------------------------------------------------------------
// DiscreteScm

void DiscreteScm::add_variable(std::string name, int domain) {
  variables_.push_back({std::move(name), domain});
  mechanisms_.emplace_back();
}

void DiscreteScm::add_exogenous(std::string name, std::vector<double> probs) {
  exogenous_.push_back({std::move(name), std::move(probs)});
}

void DiscreteScm::set_exogenous_probs(std::string_view name, std::vector<double> probs) {
  auto i = exogenous_index(name);
  if (!i) throw Error(ErrorCode::kQuery, "unknown exogenous variable '" + std::string(name) + "'");
  exogenous_[*i].probs = std::move(probs);
}

void DiscreteScm::set_mechanism(std::string_view variable, Mechanism mechanism) {
  auto i = variable_index(variable);
  if (!i) throw Error(ErrorCode::kQuery, "unknown endogenous variable '" + std::string(variable) + "'");
  mechanisms_[*i] = std::move(mechanism);
}

void DiscreteScm::set_mechanism(std::string_view variable, std::vector<std::string> parents,
                                std::vector<std::string> exogenous,
                                const std::function<int(std::span<const int>)>& fn) {
  Mechanism m{std::move(parents), std::move(exogenous), {}};
  std::vector<int> sizes;
  for (const std::string& p : m.parents) sizes.push_back(domain(p));
  for (const std::string& e : m.exogenous) sizes.push_back(domain(e));
  std::size_t rows = 1;
  for (int s : sizes) rows *= static_cast<std::size_t>(s);
  std::vector<int> inputs(sizes.size(), 0);
  m.table.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    m.table.push_back(fn(inputs));
    for (std::size_t k = sizes.size(); k-- > 0;) {
      if (++inputs[k] < sizes[k]) break;
      inputs[k] = 0;
    }
  }
  set_mechanism(variable, std::move(m));
}

const Mechanism& DiscreteScm::mechanism(std::string_view variable) const {
  auto i = variable_index(variable);
  if (!i) throw Error(ErrorCode::kQuery, "unknown endogenous variable '" + std::string(variable) + "'");
  return mechanisms_[*i];
}

std::optional<std::size_t> DiscreteScm::variable_index(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i].name == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> DiscreteScm::exogenous_index(std::string_view name) const {
  for (std::size_t i = 0; i < exogenous_.size(); ++i)
    if (exogenous_[i].name == name) return i;
  return std::nullopt;
}

int DiscreteScm::domain(std::string_view name) const {
  if (auto i = variable_index(name)) return variables_[*i].domain;
  if (auto i = exogenous_index(name)) return exogenous_[*i].domain();
  throw Error(ErrorCode::kQuery, "unknown variable '" + std::string(name) + "'");
}

std::optional<std::size_t> DiscreteScm::input_space_size(const Mechanism& mechanism) const {
  std::size_t rows = 1;
  for (const std::string& p : mechanism.parents) {
    auto i = variable_index(p);
    if (!i) return std::nullopt;
    rows *= static_cast<std::size_t>(std::max(variables_[*i].domain, 0));
  }
  for (const std::string& e : mechanism.exogenous) {
    auto i = exogenous_index(e);
    if (!i) return std::nullopt;
    rows *= exogenous_[*i].probs.size();
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Validation

const char* violation_kind_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kNormalization: return "normalization";
    case ViolationKind::kNegativeProbability: return "negative-probability";
    case ViolationKind::kEmptyDomain: return "empty-domain";
    case ViolationKind::kDuplicateName: return "duplicate-name";
    case ViolationKind::kUnknownInput: return "unknown-input";
    case ViolationKind::kTableSize: return "table-size";
    case ViolationKind::kValueOutOfDomain: return "value-out-of-domain";
    case ViolationKind::kCycle: return "cycle";
  }
  return "unknown";
}

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

ValidationReport validate_scm(const DiscreteScm& scm) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::string message) {
    report.violations.push_back({kind, std::move(message)});
  };

  std::set<std::string> names;
  for (const Variable& v : scm.variables()) {
    if (!names.insert(v.name).second) add(ViolationKind::kDuplicateName, "duplicate name '" + v.name + "'");
    if (v.domain < 1) add(ViolationKind::kEmptyDomain, "variable '" + v.name + "' has domain size < 1");
  }
  for (const Exogenous& e : scm.exogenous()) {
    if (!names.insert(e.name).second) add(ViolationKind::kDuplicateName, "duplicate name '" + e.name + "'");
    if (e.probs.empty()) {
      add(ViolationKind::kEmptyDomain, "exogenous '" + e.name + "' has an empty table");
      continue;
    }
    double sum = 0.0;
    bool negative = false;
    for (double p : e.probs) {
      if (!(p >= 0.0)) negative = true;
      sum += p;
    }
    if (negative) add(ViolationKind::kNegativeProbability, "exogenous '" + e.name + "' has a negative or NaN entry");
    if (!(std::abs(sum - 1.0) <= kNormalizationTolerance)) {
      std::ostringstream os;
      os << "exogenous '" << e.name << "' sums to " << std::setprecision(17) << sum;
      add(ViolationKind::kNormalization, os.str());
    }
  }

  for (std::size_t v = 0; v < scm.variables().size(); ++v) {
    const Variable& var = scm.variables()[v];
    const Mechanism& m = scm.mechanisms()[v];
    bool inputs_known = true;
    for (const std::string& p : m.parents) {
      if (!scm.variable_index(p)) {
        add(ViolationKind::kUnknownInput, "mechanism of '" + var.name + "' reads unknown parent '" + p + "'");
        inputs_known = false;
      }
    }
    for (const std::string& e : m.exogenous) {
      if (!scm.exogenous_index(e)) {
        add(ViolationKind::kUnknownInput, "mechanism of '" + var.name + "' reads unknown exogenous '" + e + "'");
        inputs_known = false;
      }
    }
    if (!inputs_known) continue;
    const std::size_t rows = *scm.input_space_size(m);
    if (m.table.size() != rows) {
      add(ViolationKind::kTableSize, "mechanism of '" + var.name + "' has " + std::to_string(m.table.size()) +
                                         " rows, input space has " + std::to_string(rows));
    }
    for (int value : m.table) {
      if (value < 0 || value >= var.domain) {
        add(ViolationKind::kValueOutOfDomain, "mechanism of '" + var.name + "' emits value " +
                                                  std::to_string(value) + " outside its domain");
        break;
      }
    }
  }

  if (!topological_order(scm)) {
    add(ViolationKind::kCycle, "endogenous parent graph is cyclic");
  }
  return report;
}

// ---------------------------------------------------------------------------
// DistTable

DistTable::DistTable(std::vector<std::string> scope, std::vector<int> domains, std::vector<double> probs)
    : scope_(std::move(scope)), domains_(std::move(domains)), probs_(std::move(probs)) {
  if (scope_.size() != domains_.size())
    throw Error(ErrorCode::kShape, "DistTable scope and domain lists differ in length");
  std::size_t expected = 1;
  for (int d : domains_) {
    if (d < 1) throw Error(ErrorCode::kShape, "DistTable domain size < 1");
    expected *= static_cast<std::size_t>(d);
  }
  if (expected != probs_.size())
    throw Error(ErrorCode::kShape, "DistTable has " + std::to_string(probs_.size()) +
                                       " entries, expected " + std::to_string(expected));
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw Error(ErrorCode::kNumeric, "DistTable entry is negative or NaN");
    sum += p;
  }
  if (!(std::abs(sum - 1.0) <= kNormalizationTolerance)) {
    std::ostringstream os;
    os << "DistTable mass is " << std::setprecision(17) << sum;
    throw Error(ErrorCode::kNumeric, os.str());
  }
}

std::size_t DistTable::flat_index(std::span<const int> values) const {
  if (values.size() != domains_.size())
    throw Error(ErrorCode::kQuery, "assignment arity does not match table scope");
  std::size_t flat = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] < 0 || values[k] >= domains_[k])
      throw Error(ErrorCode::kDomain, "value " + std::to_string(values[k]) + " outside domain of '" + scope_[k] + "'");
    flat = flat * static_cast<std::size_t>(domains_[k]) + static_cast<std::size_t>(values[k]);
  }
  return flat;
}

std::vector<int> DistTable::assignment(std::size_t flat) const {
  std::vector<int> values(domains_.size());
  for (std::size_t k = domains_.size(); k-- > 0;) {
    values[k] = static_cast<int>(flat % static_cast<std::size_t>(domains_[k]));
    flat /= static_cast<std::size_t>(domains_[k]);
  }
  return values;
}

double DistTable::total() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

DistTable DistTable::marginal(const std::vector<std::string>& vars) const {
  std::vector<std::size_t> pos;
  std::vector<int> doms;
  for (const std::string& v : vars) {
    auto it = std::find(scope_.begin(), scope_.end(), v);
    if (it == scope_.end()) throw Error(ErrorCode::kQuery, "variable '" + v + "' not in table scope");
    pos.push_back(static_cast<std::size_t>(it - scope_.begin()));
    doms.push_back(domains_[pos.back()]);
  }
  std::size_t out_size = 1;
  for (int d : doms) out_size *= static_cast<std::size_t>(d);
  std::vector<double> out(out_size, 0.0);
  for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
    const std::vector<int> a = assignment(flat);
    std::size_t o = 0;
    for (std::size_t k = 0; k < pos.size(); ++k) o = o * static_cast<std::size_t>(doms[k]) + static_cast<std::size_t>(a[pos[k]]);
    out[o] += probs_[flat];
  }
  return DistTable(vars, std::move(doms), std::move(out));
}

void DistTable::write_csv(std::ostream& out) const {
  for (const std::string& s : scope_) out << s << ",";
  out << "probability\n";
  std::ostringstream num;
  for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
    for (int v : assignment(flat)) out << v << ",";
    num.str("");
    num << std::setprecision(17) << probs_[flat];
    out << num.str() << "\n";
  }
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShape, "total variation over different supports");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return 0.5 * sum;
}

double total_variation(const DistTable& a, const DistTable& b) {
  if (a.scope() != b.scope() || a.domains() != b.domains())
    throw Error(ErrorCode::kShape, "total variation between tables over different scopes");
  return total_variation(a.probs(), b.probs());
}

// ---------------------------------------------------------------------------
// Enumeration, conditioning, intervention, sampling

void for_each_world(const DiscreteScm& scm,
                    const std::function<void(double, std::span<const int>)>& visit) {
  const CompiledScm c = compile(scm);
  if (c.exo_states > kMaxExogenousStates) {
    throw Error(ErrorCode::kTooLarge, "SCM '" + scm.name() + "' has more than 2^24 exogenous joint states");
  }
  const std::size_t n_exo = c.exo_probs.size();
  std::vector<int> exo(n_exo, 0);
  std::vector<int> endo(scm.variables().size(), 0);
  for (std::uint64_t state = 0; state < c.exo_states; ++state) {
    double weight = 1.0;
    for (std::size_t k = 0; k < n_exo; ++k) weight *= (*c.exo_probs[k])[static_cast<std::size_t>(exo[k])];
    c.evaluate(exo, endo);
    visit(weight, endo);
    for (std::size_t k = n_exo; k-- > 0;) {
      if (++exo[k] < static_cast<int>(c.exo_probs[k]->size())) break;
      exo[k] = 0;
    }
  }
}

DistTable joint_distribution(const DiscreteScm& scm, const std::vector<std::string>& query_vars) {
  const std::vector<std::size_t> idx = resolve_query(scm, query_vars);
  std::vector<int> doms;
  std::size_t size = 1;
  for (std::size_t i : idx) {
    doms.push_back(scm.variables()[i].domain);
    size *= static_cast<std::size_t>(doms.back());
  }
  std::vector<double> probs(size, 0.0);
  for_each_world(scm, [&](double w, std::span<const int> endo) {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < idx.size(); ++k)
      flat = flat * static_cast<std::size_t>(doms[k]) + static_cast<std::size_t>(endo[idx[k]]);
    probs[flat] += w;
  });
  return DistTable(query_vars, std::move(doms), std::move(probs));
}

DistTable conditional(const DistTable& table, std::string_view target, const Assignment& given) {
  const auto& scope = table.scope();
  auto tpos = std::find(scope.begin(), scope.end(), target);
  if (tpos == scope.end()) throw Error(ErrorCode::kQuery, "target '" + std::string(target) + "' not in table scope");
  const std::size_t t = static_cast<std::size_t>(tpos - scope.begin());
  std::vector<std::pair<std::size_t, int>> fixed;
  for (const auto& [name, value] : given) {
    auto it = std::find(scope.begin(), scope.end(), name);
    if (it == scope.end()) throw Error(ErrorCode::kQuery, "conditioning variable '" + name + "' not in table scope");
    const std::size_t k = static_cast<std::size_t>(it - scope.begin());
    if (value < 0 || value >= table.domains()[k])
      throw Error(ErrorCode::kDomain, "value " + std::to_string(value) + " outside domain of '" + name + "'");
    fixed.emplace_back(k, value);
  }
  std::vector<double> out(static_cast<std::size_t>(table.domains()[t]), 0.0);
  double mass = 0.0;
  for (std::size_t flat = 0; flat < table.size(); ++flat) {
    const std::vector<int> a = table.assignment(flat);
    bool match = true;
    for (const auto& [k, v] : fixed) {
      if (a[k] != v) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    out[static_cast<std::size_t>(a[t])] += table.probs()[flat];
    mass += table.probs()[flat];
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::kUndefinedConditional,
                "conditioning event has zero probability; P(" + std::string(target) + " | ...) is undefined");
  }
  for (double& p : out) p /= mass;
  return DistTable({std::string(target)}, {table.domains()[t]}, std::move(out));
}

DiscreteScm mutilate(const DiscreteScm& scm, const Assignment& do_assignment) {
  DiscreteScm out = scm;
  for (const auto& [name, value] : do_assignment) {
    if (scm.exogenous_index(name))
      throw Error(ErrorCode::kInvalidIntervention, "cannot intervene on exogenous variable '" + name + "'");
    auto i = scm.variable_index(name);
    if (!i) throw Error(ErrorCode::kQuery, "unknown endogenous variable '" + name + "'");
    if (value < 0 || value >= scm.variables()[*i].domain)
      throw Error(ErrorCode::kDomain, "do-value " + std::to_string(value) + " outside domain of '" + name + "'");
    out.set_mechanism(name, Mechanism{{}, {}, {value}});
  }
  return out;
}

DistTable interventional_distribution(const DiscreteScm& scm, const Assignment& do_assignment,
                                      std::string_view target) {
  return joint_distribution(mutilate(scm, do_assignment), {std::string(target)});
}

std::vector<std::vector<int>> sample_dataset(const DiscreteScm& scm, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "sample_dataset needs n >= 1");
  const CompiledScm c = compile(scm);
  Rng rng(seed);
  std::vector<std::vector<double>> cdfs;
  for (const auto* probs : c.exo_probs) {
    std::vector<double> cdf(probs->size());
    std::partial_sum(probs->begin(), probs->end(), cdf.begin());
    cdfs.push_back(std::move(cdf));
  }
  std::vector<std::vector<int>> rows(n);
  std::vector<int> exo(cdfs.size());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < cdfs.size(); ++k) {
      const double u = rng.uniform() * cdfs[k].back();
      auto it = std::upper_bound(cdfs[k].begin(), cdfs[k].end(), u);
      if (it == cdfs[k].end()) --it;
      exo[k] = static_cast<int>(it - cdfs[k].begin());
    }
    rows[s].assign(scm.variables().size(), 0);
    c.evaluate(exo, rows[s]);
  }
  return rows;
}

DistTable empirical_distribution(const DiscreteScm& scm, const std::vector<std::vector<int>>& rows,
                                 const std::vector<std::string>& vars) {
  const std::vector<std::size_t> idx = resolve_query(scm, vars);
  if (rows.empty()) throw Error(ErrorCode::kInvalidArgument, "empirical distribution of zero rows");
  std::vector<int> doms;
  std::size_t size = 1;
  for (std::size_t i : idx) {
    doms.push_back(scm.variables()[i].domain);
    size *= static_cast<std::size_t>(doms.back());
  }
  std::vector<double> counts(size, 0.0);
  for (const auto& row : rows) {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < idx.size(); ++k)
      flat = flat * static_cast<std::size_t>(doms[k]) + static_cast<std::size_t>(row[idx[k]]);
    counts[flat] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(rows.size());
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (double& c : counts) c /= total;
  return DistTable(vars, std::move(doms), std::move(counts));
}

}  // namespace tlab::scm
