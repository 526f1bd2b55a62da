#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tlab::scm {

inline constexpr double kNormalizationTolerance = 1e-12;
inline constexpr std::uint64_t kMaxExogenousStates = std::uint64_t{1} << 24;

struct Variable {
  std::string name;
  int domain = 0;

  bool operator==(const Variable&) const = default;
};

struct Exogenous {
  std::string name;
  std::vector<double> probs;

  int domain() const { return static_cast<int>(probs.size()); }
  bool operator==(const Exogenous&) const = default;
};

// Deterministic lookup table. Rows enumerate (parents..., exogenous...) in
// row-major order with the last input varying fastest.
struct Mechanism {
  std::vector<std::string> parents;
  std::vector<std::string> exogenous;
  std::vector<int> table;

  bool operator==(const Mechanism&) const = default;
};

// Ordered (variable name, value) pairs.
using Assignment = std::vector<std::pair<std::string, int>>;

class DiscreteScm {
 public:
  DiscreteScm() = default;
  explicit DiscreteScm(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  void add_variable(std::string name, int domain);
  void add_exogenous(std::string name, std::vector<double> probs);
  void set_exogenous_probs(std::string_view name, std::vector<double> probs);

  void set_mechanism(std::string_view variable, Mechanism mechanism);
  // Tabulates `fn` over the full input product space. Inputs must already be
  // declared. `fn` receives (parent values..., exogenous values...).
  void set_mechanism(std::string_view variable, std::vector<std::string> parents,
                     std::vector<std::string> exogenous,
                     const std::function<int(std::span<const int>)>& fn);

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Exogenous>& exogenous() const { return exogenous_; }
  const std::vector<Mechanism>& mechanisms() const { return mechanisms_; }
  const Mechanism& mechanism(std::string_view variable) const;

  std::optional<std::size_t> variable_index(std::string_view name) const;
  std::optional<std::size_t> exogenous_index(std::string_view name) const;
  // Domain size of an endogenous or exogenous variable; throws kQuery if unknown.
  int domain(std::string_view name) const;

  // Number of rows a mechanism over these inputs must have, or nullopt if an
  // input is undeclared.
  std::optional<std::size_t> input_space_size(const Mechanism& mechanism) const;

  bool operator==(const DiscreteScm& other) const {
    return variables_ == other.variables_ && exogenous_ == other.exogenous_ &&
           mechanisms_ == other.mechanisms_;
  }

 private:
  std::string name_;
  std::vector<Variable> variables_;
  std::vector<Exogenous> exogenous_;
  std::vector<Mechanism> mechanisms_;  // parallel to variables_
};

enum class ViolationKind {
  kNormalization,
  kNegativeProbability,
  kEmptyDomain,
  kDuplicateName,
  kUnknownInput,
  kTableSize,
  kValueOutOfDomain,
  kCycle,
};

const char* violation_kind_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
};

ValidationReport validate_scm(const DiscreteScm& scm);

// Exact finite probability table. Entries are stored row-major over `scope`
// with the last variable varying fastest.
class DistTable {
 public:
  DistTable() = default;
  // Throws kNumeric unless entries are nonnegative and sum to 1 within 1e-12.
  DistTable(std::vector<std::string> scope, std::vector<int> domains, std::vector<double> probs);

  const std::vector<std::string>& scope() const { return scope_; }
  const std::vector<int>& domains() const { return domains_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }

  std::size_t flat_index(std::span<const int> values) const;
  std::vector<int> assignment(std::size_t flat) const;
  double prob(std::span<const int> values) const { return probs_[flat_index(values)]; }
  double prob(std::initializer_list<int> values) const {
    return prob(std::span<const int>(values.begin(), values.size()));
  }
  double total() const;

  DistTable marginal(const std::vector<std::string>& vars) const;

  // One row per joint assignment plus a probability column.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<std::string> scope_;
  std::vector<int> domains_;
  std::vector<double> probs_;
};

// Total-variation distance between two tables over the same scope.
double total_variation(const DistTable& a, const DistTable& b);
double total_variation(std::span<const double> a, std::span<const double> b);

// Exact marginal over `query_vars` by full enumeration of the exogenous
// product space.
DistTable joint_distribution(const DiscreteScm& scm, const std::vector<std::string>& query_vars);

// P(target | given). Throws kUndefinedConditional on a zero-mass event.
DistTable conditional(const DistTable& table, std::string_view target, const Assignment& given);

// Replaces the mechanism of every intervened variable by a constant.
DiscreteScm mutilate(const DiscreteScm& scm, const Assignment& do_assignment);

// P(target | do(assignment)) by mutilation and exact enumeration.
DistTable interventional_distribution(const DiscreteScm& scm, const Assignment& do_assignment,
                                      std::string_view target);

// n i.i.d. ancestral samples; each row holds endogenous values in variable order.
std::vector<std::vector<int>> sample_dataset(const DiscreteScm& scm, std::size_t n,
                                             std::uint64_t seed);

// Visits every exogenous joint state with its probability and the induced
// endogenous values (variable order). Throws kTooLarge above 2^24 states.
void for_each_world(const DiscreteScm& scm,
                    const std::function<void(double, std::span<const int>)>& visit);

// Empirical distribution of sampled rows over the given endogenous variables.
DistTable empirical_distribution(const DiscreteScm& scm, const std::vector<std::vector<int>>& rows,
                                 const std::vector<std::string>& vars);

}  // namespace tlab::scm
