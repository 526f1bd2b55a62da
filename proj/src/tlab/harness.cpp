#include "tlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "tlab/binary_io.hpp"
#include "tlab/estimand.hpp"
#include "tlab/parallel.hpp"
#include "tlab/scm_io.hpp"

namespace tlab::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string num(double v) { return fmt("%.17g", v); }

std::string hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& f, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += f(items[i]);
  }
  return out;
}

std::string join_u64(const std::vector<std::uint64_t>& v, const char* sep = ",") {
  return join<std::uint64_t>(v, [](const std::uint64_t& x) { return std::to_string(x); }, sep);
}

std::string join_size(const std::vector<std::size_t>& v) {
  return join<std::size_t>(v, [](const std::size_t& x) { return std::to_string(x); });
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::optional<ExperimentKind> kind_from_name(const std::string& s) {
  if (s == "verify-props") return ExperimentKind::kVerifyProps;
  if (s == "verify-theorem") return ExperimentKind::kVerifyTheorem;
  if (s == "cmnist") return ExperimentKind::kCmnist;
  if (s == "waterbird") return ExperimentKind::kWaterbird;
  if (s == "sweep-nj") return ExperimentKind::kSweepNj;
  return std::nullopt;
}

const char* representation_name(RepresentationKind k) {
  switch (k) {
    case RepresentationKind::kVae: return "vae";
    case RepresentationKind::kNoise: return "noise";
    case RepresentationKind::kZero: return "zero";
    case RepresentationKind::kFeatures: return "features";
  }
  return "unknown";
}

}  // namespace

const char* experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kVerifyProps: return "verify-props";
    case ExperimentKind::kVerifyTheorem: return "verify-theorem";
    case ExperimentKind::kCmnist: return "cmnist";
    case ExperimentKind::kWaterbird: return "waterbird";
    case ExperimentKind::kSweepNj: return "sweep-nj";
  }
  return "unknown";
}

const char* method_name(Method method) {
  switch (method) {
    case Method::kErm: return "erm";
    case Method::kAblation: return "ablation";
    case Method::kOurs: return "ours";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Config

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.dataset = kind == ExperimentKind::kWaterbird ? datasets::DatasetSpec::waterbird_default()
                                                 : datasets::DatasetSpec::cmnist_default();
  if (kind == ExperimentKind::kSweepNj) c.methods = {Method::kOurs};
  return c;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, m); };
  if (n_i < 1 || n_j < 1) fail("ni and nj must be >= 1");
  if (seeds.empty()) fail("at least one seed is required");
  if (kind == ExperimentKind::kSweepNj) {
    if (sweep_nj.empty()) fail("sweep.nj must be nonempty");
    if (!std::is_sorted(sweep_nj.begin(), sweep_nj.end()) ||
        std::adjacent_find(sweep_nj.begin(), sweep_nj.end()) != sweep_nj.end())
      fail("sweep.nj must be strictly ascending");
    if (sweep_nj.front() < 1 || sweep_ni < 1) fail("sweep values must be >= 1");
  }
  if (kind == ExperimentKind::kCmnist && dataset.kind != datasets::DatasetKind::kCmnist)
    fail("kind cmnist needs a CMNIST-like dataset");
  if (kind == ExperimentKind::kWaterbird && dataset.kind != datasets::DatasetKind::kWaterbird)
    fail("kind waterbird needs a WaterBird-like dataset");
  if (representation == RepresentationKind::kFeatures && features_dir.empty())
    fail("representation = features needs representation.dir");
  if (methods.empty()) fail("methods must be nonempty");
  if (threads < 1) fail("threads must be >= 1");
  try {
    dataset.validate();
    train.validate();
    readout.train.validate();
    vae.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

std::string ExperimentConfig::echo() const {
  std::ostringstream os;
  os << "kind = " << experiment_kind_name(kind) << "\n";
  os << "seeds = " << join_u64(seeds) << "\n";
  os << "methods = " << join<Method>(methods, [](const Method& m) { return std::string(method_name(m)); }) << "\n";
  std::istringstream spec(dataset.echo());
  std::string line;
  while (std::getline(spec, line)) os << "dataset." << line << "\n";
  os << "train.lr = " << num(train.learning_rate) << "\n"
     << "train.batch = " << train.batch_size << "\n"
     << "train.epochs = " << train.epochs << "\n"
     << "train.momentum = " << num(train.momentum) << "\n"
     << "train.weight_decay = " << num(train.weight_decay) << "\n"
     << "erm.hidden = " << join_size(erm_hidden) << "\n"
     << "representation = " << representation_name(representation) << "\n"
     << "representation.dir = " << features_dir << "\n"
     << "vae.latent = " << vae.latent_dim << "\n"
     << "vae.hidden = " << vae.hidden << "\n"
     << "vae.lr = " << num(vae.learning_rate) << "\n"
     << "vae.batch = " << vae.batch_size << "\n"
     << "vae.epochs = " << vae.epochs << "\n"
     << "vae.sigma = " << num(vae.obs_sigma) << "\n"
     << "readout.hidden = " << readout.hidden << "\n"
     << "readout.lr = " << num(readout.train.learning_rate) << "\n"
     << "readout.batch = " << readout.train.batch_size << "\n"
     << "readout.momentum = " << num(readout.train.momentum) << "\n"
     << "readout.weight_decay = " << num(readout.train.weight_decay) << "\n"
     << "readout.epochs = " << readout.train.epochs << "\n"
     << "readout.warmup = " << readout.warmup_epochs << "\n"
     << "readout.pairing = " << neural::readout_pairing_name(readout.pairing) << "\n"
     << "readout.budget = " << readout.parameter_budget << "\n"
     << "bag.patch = " << bag_patch << "\n"
     << "bag.count = " << bag_count << "\n"
     << "bag.dim = " << bag_dim << "\n"
     << "ni = " << n_i << "\n"
     << "nj = " << n_j << "\n"
     << "eval.inference_pairing = " << neural::inference_pairing_name(inference_pairing) << "\n"
     << "eval.train_limit = " << train_eval_limit << "\n"
     << "sweep.nj = " << join_size(sweep_nj) << "\n"
     << "sweep.ni = " << sweep_ni << "\n"
     << "props.random_pairs = " << props_random_pairs << "\n"
     << "props.witness_budget = " << witness_budget << "\n"
     << "props.witness_seed = " << witness_seed << "\n"
     << "theorem.random_scms = " << theorem_random_scms << "\n"
     << "theorem.max_domain = " << theorem_max_domain << "\n";
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const { return binary::fnv1a(echo()); }

namespace {

std::uint64_t to_u64(const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument(v);
  return std::stoull(v);
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double d = std::stod(v, &used);
  if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
  return d;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument(v);
}

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
  auto sz = [&](std::size_t& dst) { dst = static_cast<std::size_t>(to_u64(v)); };
  auto sizes = [&](std::vector<std::size_t>& dst) {
    dst.clear();
    for (const auto& s : split_list(v)) dst.push_back(static_cast<std::size_t>(to_u64(s)));
  };
  auto& d = c.dataset;
  if (key == "kind") {
    // handled before the other keys
  } else if (key == "seeds") {
    c.seeds.clear();
    for (const auto& s : split_list(v)) c.seeds.push_back(to_u64(s));
  } else if (key == "methods") {
    c.methods.clear();
    for (const auto& s : split_list(v)) {
      if (s == "erm") c.methods.push_back(Method::kErm);
      else if (s == "ablation") c.methods.push_back(Method::kAblation);
      else if (s == "ours") c.methods.push_back(Method::kOurs);
      else if (s == "all") c.methods = {Method::kErm, Method::kAblation, Method::kOurs};
      else throw std::invalid_argument(s);
    }
  } else if (key == "threads") {
    c.threads = static_cast<unsigned>(to_u64(v));
  } else if (key == "dataset.kind") {
    if (v == "cmnist") d.kind = datasets::DatasetKind::kCmnist;
    else if (v == "waterbird") d.kind = datasets::DatasetKind::kWaterbird;
    else throw std::invalid_argument(v);
  } else if (key == "dataset.classes") {
    d.num_classes = static_cast<int>(to_u64(v));
  } else if (key == "dataset.image") {
    unsigned h = 0, w = 0, ch = 0;
    char tail = 0;
    if (std::sscanf(v.c_str(), "%ux%ux%u%c", &h, &w, &ch, &tail) != 3) throw std::invalid_argument(v);
    d.shape = {h, w, ch};
  } else if (key == "dataset.rho_train") {
    d.rho_train = to_double(v);
  } else if (key == "dataset.rho_ood") {
    if (v == "flipped" || v == "balanced") d.rho_ood.reset();
    else d.rho_ood = to_double(v);
  } else if (key == "dataset.n_train") {
    sz(d.n_train);
  } else if (key == "dataset.n_val") {
    sz(d.n_val);
  } else if (key == "dataset.n_test") {
    sz(d.n_test);
  } else if (key == "dataset.n_ood") {
    sz(d.n_ood);
  } else if (key == "dataset.jitter") {
    d.jitter = static_cast<int>(to_u64(v));
  } else if (key == "dataset.noise") {
    d.noise = to_double(v);
  } else if (key == "dataset.coloring") {
    if (v == "background") d.coloring = datasets::Coloring::kBackground;
    else if (v == "foreground") d.coloring = datasets::Coloring::kForeground;
    else throw std::invalid_argument(v);
  } else if (key == "dataset.foreground_only") {
    d.foreground_only = to_bool(v);
  } else if (key == "train.lr") {
    c.train.learning_rate = to_double(v);
  } else if (key == "train.batch") {
    sz(c.train.batch_size);
  } else if (key == "train.epochs") {
    sz(c.train.epochs);
  } else if (key == "train.momentum") {
    c.train.momentum = to_double(v);
  } else if (key == "train.weight_decay") {
    c.train.weight_decay = to_double(v);
  } else if (key == "erm.hidden") {
    sizes(c.erm_hidden);
  } else if (key == "representation") {
    if (v == "vae") c.representation = RepresentationKind::kVae;
    else if (v == "noise") c.representation = RepresentationKind::kNoise;
    else if (v == "zero") c.representation = RepresentationKind::kZero;
    else if (v == "features") c.representation = RepresentationKind::kFeatures;
    else throw std::invalid_argument(v);
  } else if (key == "representation.dir") {
    c.features_dir = v;
  } else if (key == "vae.latent") {
    sz(c.vae.latent_dim);
  } else if (key == "vae.hidden") {
    sz(c.vae.hidden);
  } else if (key == "vae.lr") {
    c.vae.learning_rate = to_double(v);
  } else if (key == "vae.batch") {
    sz(c.vae.batch_size);
  } else if (key == "vae.epochs") {
    sz(c.vae.epochs);
  } else if (key == "vae.sigma") {
    c.vae.obs_sigma = to_double(v);
  } else if (key == "readout.hidden") {
    sz(c.readout.hidden);
  } else if (key == "readout.lr") {
    c.readout.train.learning_rate = to_double(v);
  } else if (key == "readout.batch") {
    sz(c.readout.train.batch_size);
  } else if (key == "readout.momentum") {
    c.readout.train.momentum = to_double(v);
  } else if (key == "readout.weight_decay") {
    c.readout.train.weight_decay = to_double(v);
  } else if (key == "readout.epochs") {
    sz(c.readout.train.epochs);
  } else if (key == "readout.warmup") {
    sz(c.readout.warmup_epochs);
  } else if (key == "readout.pairing") {
    if (v == "same-instance") c.readout.pairing = neural::ReadoutPairing::kSameInstance;
    else if (v == "same-category") c.readout.pairing = neural::ReadoutPairing::kSameCategory;
    else throw std::invalid_argument(v);
  } else if (key == "readout.budget") {
    sz(c.readout.parameter_budget);
  } else if (key == "bag.patch") {
    sz(c.bag_patch);
  } else if (key == "bag.count") {
    sz(c.bag_count);
  } else if (key == "bag.dim") {
    sz(c.bag_dim);
  } else if (key == "ni") {
    sz(c.n_i);
  } else if (key == "nj") {
    sz(c.n_j);
  } else if (key == "eval.inference_pairing") {
    if (v == "random") c.inference_pairing = neural::InferencePairing::kRandom;
    else if (v == "same-category") c.inference_pairing = neural::InferencePairing::kSameCategory;
    else throw std::invalid_argument(v);
  } else if (key == "eval.train_limit") {
    sz(c.train_eval_limit);
  } else if (key == "sweep.nj") {
    sizes(c.sweep_nj);
  } else if (key == "sweep.ni") {
    sz(c.sweep_ni);
  } else if (key == "props.random_pairs") {
    sz(c.props_random_pairs);
  } else if (key == "props.witness_budget") {
    c.witness_budget = to_u64(v);
  } else if (key == "props.witness_seed") {
    c.witness_seed = to_u64(v);
  } else if (key == "theorem.random_scms") {
    sz(c.theorem_random_scms);
  } else if (key == "theorem.max_domain") {
    c.theorem_max_domain = static_cast<int>(to_u64(v));
  } else {
    throw std::out_of_range(key);
  }
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  std::vector<std::tuple<std::size_t, std::string, std::string>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::optional<ExperimentKind> kind;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key == "kind") {
      kind = kind_from_name(value);
      if (!kind) throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": unknown kind '" + value + "'");
    }
    entries.emplace_back(line_no, key, value);
  }
  if (!kind) throw Error(ErrorCode::kConfig, "config has no 'kind' key");
  ExperimentConfig c = default_config(*kind);
  for (const auto& [no, key, value] : entries) {
    try {
      apply_key(c, key, value);
    } catch (const std::out_of_range&) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(no) + ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(no) + ": bad value '" + value + "' for " + key);
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Pipelines

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }), values.end());
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> MetricsRecord::values(Method method, double MethodMetrics::* field) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.method == method && r.error.empty()) out.push_back(r.*field);
  return out;
}

namespace {

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t role) { return derive_seed(seed, {0xe7, role}); }

struct Accuracies {
  double train = kNaN, test = kNaN, ood = kNaN, worst_group = kNaN;
};

double worst_group_accuracy(std::span<const int> pred, const datasets::Split& s) {
  std::map<int, std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto& g = groups[s.groups[i]];
    g.first += pred[i] == s.labels[i];
    ++g.second;
  }
  double worst = 1.0;
  for (const auto& [_, g] : groups) worst = std::min(worst, static_cast<double>(g.first) / static_cast<double>(g.second));
  return groups.empty() ? kNaN : worst;
}

datasets::Split head(const datasets::Split& s, std::size_t n) {
  n = std::min(n, s.size());
  datasets::Split out;
  out.name = s.name;
  out.shape = s.shape;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  out.pixels = neural::gather_rows(s.pixels, idx);
  out.labels.assign(s.labels.begin(), s.labels.begin() + static_cast<std::ptrdiff_t>(n));
  out.attributes.assign(s.attributes.begin(), s.attributes.begin() + static_cast<std::ptrdiff_t>(n));
  out.groups.assign(s.groups.begin(), s.groups.begin() + static_cast<std::ptrdiff_t>(n));
  out.ids.assign(s.ids.begin(), s.ids.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

// Everything trained for one seed.
struct SeedState {
  datasets::DatasetSplits data;
  datasets::Split train_eval;
  std::optional<neural::Mlp> erm;
  neural::Tensor bags;
  neural::RepresentationTable rep_train_eval, rep_test, rep_ood;
  std::optional<neural::CausalPredictor> predictor;
  std::vector<TimingRow> timing;
};

neural::RepresentationTable features_for(const ExperimentConfig& c, const std::string& split, std::size_t rows) {
  const auto t = neural::load_feature_table(std::filesystem::path(c.features_dir) / (split + ".csv"));
  if (t.rows() < rows)
    throw Error(ErrorCode::kShape, "feature table " + split + ".csv has " + std::to_string(t.rows()) + " rows, need " +
                                       std::to_string(rows));
  return t;
}

SeedState prepare_seed(const ExperimentConfig& c, std::uint64_t seed, bool need_erm, bool need_readout) {
  SeedState st;
  auto t0 = std::chrono::steady_clock::now();
  auto mark = [&](const char* phase) {
    st.timing.push_back({seed, phase, seconds_since(t0)});
    t0 = std::chrono::steady_clock::now();
  };
  st.data = datasets::generate(c.dataset, seed);
  st.train_eval = head(st.data.train, c.train_eval_limit);
  mark("data");
  const auto K = static_cast<std::size_t>(c.dataset.num_classes);

  if (need_erm) {
    auto cfg = c.train;
    cfg.seed = sub_seed(seed, 1);
    st.erm = neural::train_erm(st.data.train.pixels, st.data.train.labels, K, c.erm_hidden, cfg);
    mark("erm");
  }
  if (!need_readout) return st;

  const std::size_t n = st.data.train.size();
  neural::RepresentationTable rep_train;
  switch (c.representation) {
    case RepresentationKind::kVae: {
      auto vc = c.vae;
      vc.seed = sub_seed(seed, 2);
      const auto vae = neural::train_vae(st.data.train.pixels, vc);
      mark("vae");
      rep_train = neural::vae_representation(vae, st.data.train.pixels);
      st.rep_train_eval = neural::vae_representation(vae, st.train_eval.pixels);
      st.rep_test = neural::vae_representation(vae, st.data.test.pixels);
      st.rep_ood = neural::vae_representation(vae, st.data.ood.pixels);
      break;
    }
    case RepresentationKind::kNoise:
      rep_train = neural::noise_representation(n, c.vae.latent_dim);
      st.rep_train_eval = neural::noise_representation(st.train_eval.size(), c.vae.latent_dim);
      st.rep_test = neural::noise_representation(st.data.test.size(), c.vae.latent_dim);
      st.rep_ood = neural::noise_representation(st.data.ood.size(), c.vae.latent_dim);
      break;
    case RepresentationKind::kZero:
      rep_train = neural::zero_representation(n, c.vae.latent_dim);
      st.rep_train_eval = neural::zero_representation(st.train_eval.size(), c.vae.latent_dim);
      st.rep_test = neural::zero_representation(st.data.test.size(), c.vae.latent_dim);
      st.rep_ood = neural::zero_representation(st.data.ood.size(), c.vae.latent_dim);
      break;
    case RepresentationKind::kFeatures:
      rep_train = features_for(c, "train", n);
      st.rep_train_eval = rep_train;
      st.rep_test = features_for(c, "test", st.data.test.size());
      st.rep_ood = features_for(c, "ood", st.data.ood.size());
      break;
  }

  const neural::PatchBagEncoder encoder(c.dataset.shape, c.bag_patch, c.bag_count, c.bag_dim, sub_seed(seed, 3));
  st.bags = encoder.encode_all(st.data.train.pixels, sub_seed(seed, 3));
  mark("bags");

  auto rc = c.readout;
  rc.train.seed = sub_seed(seed, 4);
  const auto readout = neural::train_readout(st.bags, st.data.train.labels, K, rep_train, rc);
  st.predictor.emplace(readout, st.bags, st.data.train.labels);
  mark("readout");
  return st;
}

void check_fairness(const ExperimentConfig& c) {
  const bool has_erm = std::find(c.methods.begin(), c.methods.end(), Method::kErm) != c.methods.end();
  const bool has_readout = std::any_of(c.methods.begin(), c.methods.end(), [](Method m) { return m != Method::kErm; });
  if (has_erm && has_readout && c.erm_hidden != std::vector<std::size_t>{c.readout.hidden, c.readout.hidden})
    throw Error(ErrorCode::kConfig, "ERM and readout must use the same hidden widths (erm.hidden = " +
                                        join_size(c.erm_hidden) + ", readout.hidden = " +
                                        std::to_string(c.readout.hidden) + ")");
}

Accuracies evaluate(const ExperimentConfig& c, const SeedState& st, Method method, std::uint64_t seed) {
  Accuracies a;
  auto score = [&](const std::vector<int>& pred, const datasets::Split& s) { return neural::accuracy(pred, s.labels); };
  std::vector<int> p_train, p_test, p_ood;
  if (method == Method::kErm) {
    p_train = neural::predict_labels(*st.erm, st.train_eval.pixels);
    p_test = neural::predict_labels(*st.erm, st.data.test.pixels);
    p_ood = neural::predict_labels(*st.erm, st.data.ood.pixels);
  } else {
    neural::SamplingOptions o;
    o.n_i = method == Method::kAblation ? 1 : c.n_i;
    o.n_j = method == Method::kAblation ? 1 : c.n_j;
    o.pairing = c.inference_pairing;
    o.seed = sub_seed(seed, method == Method::kAblation ? 5 : 6);
    p_train = st.predictor->predict(st.rep_train_eval, o, st.train_eval.labels);
    if (st.data.test.size()) p_test = st.predictor->predict(st.rep_test, o, st.data.test.labels);
    p_ood = st.predictor->predict(st.rep_ood, o, st.data.ood.labels);
  }
  a.train = score(p_train, st.train_eval);
  if (!p_test.empty()) a.test = score(p_test, st.data.test);
  a.ood = score(p_ood, st.data.ood);
  a.worst_group = worst_group_accuracy(p_ood, st.data.ood);
  return a;
}

}  // namespace

MetricsRecord run_experiment(const ExperimentConfig& c) {
  c.validate();
  if (c.kind != ExperimentKind::kCmnist && c.kind != ExperimentKind::kWaterbird)
    throw Error(ErrorCode::kConfig, std::string("run needs kind cmnist or waterbird, got ") + experiment_kind_name(c.kind));
  check_fairness(c);
  const bool need_erm = std::find(c.methods.begin(), c.methods.end(), Method::kErm) != c.methods.end();
  const bool need_readout = std::any_of(c.methods.begin(), c.methods.end(), [](Method m) { return m != Method::kErm; });

  MetricsRecord rec;
  rec.experiment = experiment_kind_name(c.kind);
  rec.config_hash = c.hash();
  rec.seeds = c.seeds;
  std::vector<std::vector<MethodMetrics>> per_seed(c.seeds.size());
  std::vector<std::vector<TimingRow>> timing(c.seeds.size());
  parallel_for(c.seeds.size(), c.threads, [&](std::size_t k) {
    const std::uint64_t seed = c.seeds[k];
    auto fail_all = [&](const std::string& msg) {
      for (Method m : c.methods) per_seed[k].push_back({seed, m, kNaN, kNaN, kNaN, kNaN, msg});
    };
    try {
      auto st = prepare_seed(c, seed, need_erm, need_readout);
      for (Method m : c.methods) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto a = evaluate(c, st, m, seed);
        st.timing.push_back({seed, std::string("eval-") + method_name(m), seconds_since(t0)});
        per_seed[k].push_back({seed, m, a.train, a.test, a.ood, a.worst_group, ""});
      }
      timing[k] = std::move(st.timing);
    } catch (const Error& e) {
      fail_all(std::string(error_code_name(e.code())) + ": " + e.what());
    } catch (const std::exception& e) {
      fail_all(e.what());
    }
  });
  for (std::size_t k = 0; k < c.seeds.size(); ++k) {
    rec.rows.insert(rec.rows.end(), per_seed[k].begin(), per_seed[k].end());
    rec.timing.insert(rec.timing.end(), timing[k].begin(), timing[k].end());
  }
  return rec;
}

SweepResult sweep_nj(const ExperimentConfig& c) {
  c.validate();
  if (c.sweep_nj.empty()) throw Error(ErrorCode::kConfig, "sweep.nj must be nonempty");
  SweepResult out;
  out.config_hash = c.hash();
  out.seeds = c.seeds;
  out.n_i = c.sweep_ni;
  std::vector<std::vector<double>> acc(c.seeds.size(), std::vector<double>(c.sweep_nj.size(), kNaN));
  std::vector<std::string> errors(c.seeds.size());
  std::vector<std::vector<TimingRow>> timing(c.seeds.size());
  parallel_for(c.seeds.size(), c.threads, [&](std::size_t k) {
    const std::uint64_t seed = c.seeds[k];
    try {
      auto st = prepare_seed(c, seed, false, true);
      for (std::size_t q = 0; q < c.sweep_nj.size(); ++q) {
        const auto t0 = std::chrono::steady_clock::now();
        neural::SamplingOptions o;
        o.n_i = c.sweep_ni;
        o.n_j = c.sweep_nj[q];
        o.pairing = c.inference_pairing;
        o.seed = sub_seed(seed, 6);
        const auto pred = st.predictor->predict(st.rep_ood, o, st.data.ood.labels);
        acc[k][q] = neural::accuracy(pred, st.data.ood.labels);
        st.timing.push_back({seed, "eval-nj-" + std::to_string(c.sweep_nj[q]), seconds_since(t0)});
      }
      timing[k] = std::move(st.timing);
    } catch (const Error& e) {
      errors[k] = "seed " + std::to_string(seed) + ": " + error_code_name(e.code()) + ": " + e.what();
    } catch (const std::exception& e) {
      errors[k] = "seed " + std::to_string(seed) + ": " + e.what();
    }
  });
  for (std::size_t q = 0; q < c.sweep_nj.size(); ++q) {
    SweepRow row;
    row.n_j = c.sweep_nj[q];
    for (std::size_t k = 0; k < c.seeds.size(); ++k) row.per_seed.push_back(acc[k][q]);
    row.median = median(row.per_seed);
    std::vector<double> ok;
    for (double v : row.per_seed)
      if (!std::isnan(v)) ok.push_back(v);
    row.min = ok.empty() ? kNaN : *std::min_element(ok.begin(), ok.end());
    row.max = ok.empty() ? kNaN : *std::max_element(ok.begin(), ok.end());
    out.rows.push_back(row);
  }
  for (std::size_t k = 0; k < c.seeds.size(); ++k) {
    if (!errors[k].empty()) out.errors.push_back(errors[k]);
    out.timing.insert(out.timing.end(), timing[k].begin(), timing[k].end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verification suites

bool CheckReport::all_pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error(ErrorCode::kIo, "cannot create output directory " + dir.string());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

void write_check_report(const CheckReport& report, const ExperimentConfig& c, const std::filesystem::path& dir,
                        const std::string& stem, const std::string& extra_md) {
  ensure_dir(dir);
  {
    auto csv = open_out(dir / (stem + ".csv"));
    csv << "config_hash,check,value,criterion,pass\n";
    for (const auto& ch : report.checks)
      csv << hex(c.hash()) << ',' << ch.name << ','
          << num(ch.value) << ',' << ch.criterion << ',' << (ch.pass ? "PASS" : "FAIL") << '\n';
  }
  auto md = open_out(dir / "report.md");
  md << "# " << report.title << "\n\n";
  md << "Overall: **" << (report.all_pass() ? "PASS" : "FAIL") << "**\n\n";
  md << "| Check | Value | Criterion | Result | Detail |\n|---|---|---|---|---|\n";
  for (const auto& ch : report.checks)
    md << "| " << ch.name << " | " << fmt("%.6g", ch.value) << " | " << ch.criterion << " | "
       << (ch.pass ? "PASS" : "FAIL") << " | " << ch.detail << " |\n";
  md << extra_md;
  md << "\n## Config\n\nHash `" << hex(c.hash()) << "`\n\n```\n" << c.echo() << "```\n";
}

transport::BowShape shape_for(std::size_t k) {
  transport::BowShape s;
  s.x = 2 + static_cast<int>(k % 3);
  s.y = 2 + static_cast<int>((k / 3) % 2);
  s.uxy = 2 + static_cast<int>((k / 6) % 2);
  s.ux = 2 + static_cast<int>((k / 12) % 2);
  return s;
}

}  // namespace

CheckReport verify_propositions(const ExperimentConfig& c, const std::filesystem::path& out_dir) {
  CheckReport r;
  r.title = "Transportability propositions";
  std::ostringstream extra;

  const auto pair = transport::bow_pair();
  const auto assoc = transport::association_gap(pair);
  const auto inv = transport::causal_invariance_gap(pair);
  const double gap1 = assoc.per_x.count(1) ? assoc.per_x.at(1) : kNaN;
  r.checks.push_back({"bowpair_association_gap_x1", gap1, "= 0.8 +- 1e-12", std::abs(gap1 - 0.8) <= 1e-12,
                      "max over x " + fmt("%.17g", assoc.max_gap)});
  r.checks.push_back({"bowpair_causal_gap", inv.max_gap, "<= 1e-12", inv.max_gap <= 1e-12, ""});
  extra << "\n## BowPair per-x gaps\n\n| x | association | causal |\n|---|---|---|\n";
  for (const auto& [x, g] : assoc.per_x)
    extra << "| " << x << " | " << fmt("%.17g", g) << " | " << fmt("%.3g", inv.per_x.at(x)) << " |\n";

  double worst = 0.0;
  for (std::size_t k = 0; k < c.props_random_pairs; ++k) {
    const auto p = transport::random_transport_pair(derive_seed(c.witness_seed, {0x2a, k}), shape_for(k));
    worst = std::max(worst, transport::causal_invariance_gap(p).max_gap);
  }
  r.checks.push_back({"invariance_random_pairs_max_causal_gap", worst, "<= 1e-12", worst <= 1e-12,
                      std::to_string(c.props_random_pairs) + " pairs"});

  {
    transport::BowParams bad;
    bad.fx = {0, 1, 1, 0};
    bad.fy = {1, 1, 1, 1};
    bad.p_uxy = {0.5, 0.5};
    bad.p_ux = {0.9, 0.1};
    const auto corrupt = transport::TransportPair::unchecked(transport::bow_demo(), transport::make_bow_scm("Corrupt", bad));
    const auto v = corrupt.violations();
    bool rejected = false;
    try {
      transport::TransportPair(corrupt.source(), corrupt.target());
    } catch (const Error& e) {
      rejected = e.code() == ErrorCode::kStructure;
    }
    const double g = transport::causal_invariance_gap(corrupt).max_gap;
    r.checks.push_back({"invariance_negative_control_gap", g, "> 0 and construction rejected", g > 0 && rejected && !v.empty(),
                        v.empty() ? "" : v.front()});
  }

  const double sym = std::abs(transport::association_gap(pair).max_gap - transport::association_gap(pair.swapped()).max_gap);
  r.checks.push_back({"association_gap_symmetry", sym, "<= 1e-12", sym <= 1e-12, ""});

  transport::WitnessSearchOptions wo;
  wo.budget = c.witness_budget;
  wo.seed = c.witness_seed;
  try {
    const auto w = transport::nonidentifiability_witness({2, 2, 2, 2, true}, wo);
    const auto check = transport::verify_witness(w.scm_a, w.scm_b);
    r.checks.push_back({"nonid_witness_joint_tv", check.joint_tv, "<= 1e-9", check.joint_tv <= 1e-9,
                        std::to_string(w.iterations_used) + " of " + std::to_string(wo.budget) + " iterations"});
    r.checks.push_back({"nonid_witness_do_gap", check.do_gap, ">= 0.1", check.do_gap >= 0.1,
                        "argmax x = " + std::to_string(w.argmax_x)});
    r.checks.push_back({"nonid_witness_same_graph", check.same_graph ? 1.0 : 0.0, "= 1", check.same_graph, ""});
    if (!out_dir.empty()) {
      ensure_dir(out_dir);
      scm::save_scm(w.scm_a, out_dir / "witness_a.scm");
      scm::save_scm(w.scm_b, out_dir / "witness_b.scm");
      extra << "\nWitness SCMs: `witness_a.scm`, `witness_b.scm`.\n";
    }
  } catch (const Error& e) {
    r.checks.push_back({"nonid_witness_found", 0.0, "found within budget", false,
                        std::string(error_code_name(e.code())) + ": " + e.what()});
  }
  try {
    transport::nonidentifiability_witness({2, 2, 2, 2, false}, wo);
    r.checks.push_back({"nonid_unconfounded_refused", 0.0, "structural-identifiability error", false, ""});
  } catch (const Error& e) {
    const bool ok = e.code() == ErrorCode::kStructurallyIdentifiable;
    r.checks.push_back({"nonid_unconfounded_refused", ok ? 1.0 : 0.0, "structural-identifiability error", ok, e.what()});
  }

  if (!out_dir.empty()) write_check_report(r, c, out_dir, "propositions", extra.str());
  return r;
}

CheckReport verify_theorem(const ExperimentConfig& c, const std::filesystem::path& out_dir) {
  using namespace estimand;
  CheckReport r;
  r.title = "Neural-representation estimand";
  double worst_exact = 0.0, worst_chain = 0.0, worst_mc = 0.0;
  for (std::size_t k = 0; k < c.theorem_random_scms; ++k) {
    const auto m = random_factored_scm(derive_seed(c.witness_seed, {0x7e0, k}), c.theorem_max_domain);
    const auto models = oracle_models_from_scm(m);
    const auto prior = scm::joint_distribution(m, {"Z", "W"});
    const int zs = m.domain("Z"), ws = m.domain("W");
    for (int z = 0; z < zs; ++z) {
      for (int w = 0; w < ws; ++w) {
        const auto est = exact_do_theorem1(models.representation, models.readout, {z, w}, prior);
        const auto truth = scm::interventional_distribution(m, {{"Z", z}, {"W", w}}, "Y");
        worst_exact = std::max(worst_exact, scm::total_variation(est.dist, truth.probs()));
      }
      const auto bd = backdoor_adjustment(m, z);
      const auto dz = scm::interventional_distribution(m, {{"Z", z}}, "Y");
      const auto mz = marginalized_adjustment(m, z);
      worst_chain = std::max({worst_chain, scm::total_variation(bd, dz), scm::total_variation(bd, mz),
                              scm::total_variation(mz, dz)});
    }
    if (k < 20) {
      std::vector<FactoredSample> pool;
      for (int z = 0; z < zs; ++z)
        for (int w = 0; w < ws; ++w) pool.push_back({z, w});
      const auto n = static_cast<std::size_t>(zs * ws);
      const scm::DistTable uniform({"Z", "W"}, {zs, ws}, std::vector<double>(n, 1.0 / static_cast<double>(n)));
      MonteCarloOptions o;
      o.n_i = 1;
      o.n_j = n * 4;
      o.sampling = PoolSampling::kExhaustive;
      const auto exact = exact_do_theorem1(models.representation, models.readout, {0, 0}, uniform);
      const auto mc = mc_do_estimate(models.representation, models.readout, {0, 0}, pool, o);
      worst_mc = std::max(worst_mc, scm::total_variation(exact.dist, mc.dist));
    }
  }
  r.checks.push_back({"estimand_max_tv", worst_exact, "<= 1e-10", worst_exact <= 1e-10,
                      std::to_string(c.theorem_random_scms) + " random SCMs, every (z, w)"});
  r.checks.push_back({"proof_chain_max_tv", worst_chain, "<= 1e-12", worst_chain <= 1e-12,
                      "backdoor vs mutilation vs marginalized form"});
  r.checks.push_back({"mc_full_coverage_max_tv", worst_mc, "<= 1e-9", worst_mc <= 1e-9, "exhaustive pool mode"});

  // Monte-Carlo error at small and large n_j on one fixed instance.
  const auto m = random_factored_scm(11, FactoredSizes{3, 4, 3});
  const auto models = oracle_models_from_scm(m);
  std::vector<FactoredSample> pool;
  for (int z = 0; z < 3; ++z)
    for (int w = 0; w < 4; ++w) pool.push_back({z, w});
  const scm::DistTable uniform({"Z", "W"}, {3, 4}, std::vector<double>(12, 1.0 / 12.0));
  const auto exact = exact_do_theorem1(models.representation, models.readout, {1, 2}, uniform);
  auto mad = [&](std::size_t nj) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      MonteCarloOptions o;
      o.n_i = 1;
      o.n_j = nj;
      o.seed = s;
      const auto e = mc_do_estimate(models.representation, models.readout, {1, 2}, pool, o);
      for (std::size_t y = 0; y < e.dist.size(); ++y) total += std::abs(e.dist[y] - exact.dist[y]);
    }
    return total / 20.0;
  };
  const double m4 = mad(4), m64 = mad(64);
  r.checks.push_back({"mc_mean_abs_dev_nj64_below_nj4", m64, "< " + fmt("%.6g", m4), m64 < m4, "20 seeds"});

  if (!out_dir.empty()) write_check_report(r, c, out_dir, "theorem", "");
  return r;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string acc(double v) { return std::isnan(v) ? "" : fmt("%.6f", v); }
std::string pct(double v) { return std::isnan(v) ? "-" : fmt("%.1f", 100.0 * v); }

std::string summary_markdown(const MetricsRecord& rec, const std::string& config_echo) {
  std::ostringstream md;
  md << "# " << rec.experiment << " results\n\n";
  md << "Config hash `" << hex(rec.config_hash) << "`, seeds " << join_u64(rec.seeds, ", ") << ".\n\n";
  md << "Median over seeds (min to max), accuracy in percent.\n\n";
  md << "| Method | Train | In-distribution | Out-of-distribution | Worst-group OOD |\n|---|---|---|---|---|\n";
  std::vector<Method> seen;
  for (const auto& row : rec.rows)
    if (std::find(seen.begin(), seen.end(), row.method) == seen.end()) seen.push_back(row.method);
  for (Method m : seen) {
    md << "| " << method_name(m);
    for (auto field : {&MethodMetrics::train_accuracy, &MethodMetrics::test_accuracy, &MethodMetrics::ood_accuracy,
                       &MethodMetrics::worst_group_ood}) {
      const auto v = rec.values(m, field);
      if (v.empty()) {
        md << " | -";
        continue;
      }
      md << " | " << pct(median(v)) << " (" << pct(*std::min_element(v.begin(), v.end())) << " to "
         << pct(*std::max_element(v.begin(), v.end())) << ")";
    }
    md << " |\n";
  }
  bool any_error = false;
  for (const auto& row : rec.rows)
    if (!row.error.empty()) {
      if (!any_error) md << "\n## Failed seeds\n\n";
      any_error = true;
      md << "- seed " << row.seed << ", " << method_name(row.method) << ": " << row.error << "\n";
    }
  if (!config_echo.empty()) md << "\n## Config\n\n```\n" << config_echo << "```\n";
  return md.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

}  // namespace

std::string format_metrics_csv(const MetricsRecord& rec) {
  std::ostringstream os;
  os << "experiment,config_hash,seed,method,train_acc,test_acc,ood_acc,worst_group_ood,error\n";
  for (const auto& r : rec.rows)
    os << rec.experiment << ',' << hex(rec.config_hash) << ',' << r.seed << ',' << method_name(r.method) << ','
       << acc(r.train_accuracy) << ',' << acc(r.test_accuracy) << ',' << acc(r.ood_accuracy) << ','
       << acc(r.worst_group_ood) << ',' << csv_escape(r.error) << '\n';
  return os.str();
}

MetricsRecord parse_metrics_csv(std::string_view text) {
  MetricsRecord rec;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto field = [](const std::string& s) { return s.empty() ? kNaN : std::stod(s); };
  while (std::getline(in, line)) {
    if (++line_no == 1 || line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    cells.push_back(cur);
    if (cells.size() != 9) throw Error(ErrorCode::kParse, "metrics.csv line " + std::to_string(line_no) + ": expected 9 columns");
    try {
      rec.experiment = cells[0];
      rec.config_hash = std::stoull(cells[1], nullptr, 16);
      MethodMetrics m;
      m.seed = std::stoull(cells[2]);
      if (cells[3] == "erm") m.method = Method::kErm;
      else if (cells[3] == "ablation") m.method = Method::kAblation;
      else if (cells[3] == "ours") m.method = Method::kOurs;
      else throw std::invalid_argument(cells[3]);
      m.train_accuracy = field(cells[4]);
      m.test_accuracy = field(cells[5]);
      m.ood_accuracy = field(cells[6]);
      m.worst_group_ood = field(cells[7]);
      m.error = cells[8];
      if (std::find(rec.seeds.begin(), rec.seeds.end(), m.seed) == rec.seeds.end()) rec.seeds.push_back(m.seed);
      rec.rows.push_back(m);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParse, "metrics.csv line " + std::to_string(line_no) + ": malformed value");
    }
  }
  if (rec.rows.empty()) throw Error(ErrorCode::kParse, "metrics.csv holds no records");
  return rec;
}

void emit_report(const MetricsRecord& rec, const ExperimentConfig& c, const std::filesystem::path& dir) {
  if (rec.rows.empty()) throw Error(ErrorCode::kInvalidArgument, "no records to report");
  ensure_dir(dir);
  open_out(dir / "metrics.csv") << format_metrics_csv(rec);
  {
    auto agg = open_out(dir / "aggregate.csv");
    agg << "config_hash,seeds,method,metric,median,min,max\n";
    std::vector<Method> seen;
    for (const auto& row : rec.rows)
      if (std::find(seen.begin(), seen.end(), row.method) == seen.end()) seen.push_back(row.method);
    const std::pair<const char*, double MethodMetrics::*> metrics[] = {
        {"train_acc", &MethodMetrics::train_accuracy},
        {"test_acc", &MethodMetrics::test_accuracy},
        {"ood_acc", &MethodMetrics::ood_accuracy},
        {"worst_group_ood", &MethodMetrics::worst_group_ood}};
    for (Method m : seen)
      for (const auto& [name, field] : metrics) {
        const auto v = rec.values(m, field);
        std::vector<double> ok;
        for (double x : v)
          if (!std::isnan(x)) ok.push_back(x);
        agg << hex(rec.config_hash) << ',' << join_u64(rec.seeds, ";") << ',' << method_name(m) << ',' << name << ','
            << acc(median(ok)) << ',' << (ok.empty() ? "" : acc(*std::min_element(ok.begin(), ok.end()))) << ','
            << (ok.empty() ? "" : acc(*std::max_element(ok.begin(), ok.end()))) << '\n';
      }
  }
  open_out(dir / "summary.md") << summary_markdown(rec, c.echo());
  open_out(dir / "config.echo") << c.echo();
  auto timing = open_out(dir / "timing.csv");
  timing << "seed,phase,seconds\n";
  for (const auto& t : rec.timing) timing << t.seed << ',' << t.phase << ',' << fmt("%.3f", t.seconds) << '\n';
}

void emit_sweep(const SweepResult& sweep, const ExperimentConfig& c, const std::filesystem::path& dir) {
  ensure_dir(dir);
  {
    auto csv = open_out(dir / "sweep.csv");
    csv << "config_hash,seeds,n_i,n_j,median_ood_acc,min_ood_acc,max_ood_acc\n";
    for (const auto& r : sweep.rows)
      csv << hex(sweep.config_hash) << ',' << join_u64(sweep.seeds, ";") << ',' << sweep.n_i << ',' << r.n_j << ','
          << acc(r.median) << ',' << acc(r.min) << ',' << acc(r.max) << '\n';
  }
  {
    auto md = open_out(dir / "sweep.md");
    md << "# OOD accuracy versus n_j\n\nConfig hash `" << hex(sweep.config_hash) << "`, seeds "
       << join_u64(sweep.seeds, ", ") << ", n_i = " << sweep.n_i << ".\n\n";
    md << "| n_j | median OOD | min | max |\n|---|---|---|---|\n";
    for (const auto& r : sweep.rows)
      md << "| " << r.n_j << " | " << pct(r.median) << " | " << pct(r.min) << " | " << pct(r.max) << " |\n";
    for (const auto& e : sweep.errors) md << "\n- failed: " << e << "\n";
    md << "\n## Config\n\n```\n" << c.echo() << "```\n";
  }
  open_out(dir / "config.echo") << c.echo();
  auto timing = open_out(dir / "timing.csv");
  timing << "seed,phase,seconds\n";
  for (const auto& t : sweep.timing) timing << t.seed << ',' << t.phase << ',' << fmt("%.3f", t.seconds) << '\n';
}

void rebuild_summary(const std::filesystem::path& dir) {
  std::ifstream in(dir / "metrics.csv");
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + (dir / "metrics.csv").string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rec = parse_metrics_csv(ss.str());
  std::string echo;
  if (std::ifstream e(dir / "config.echo"); e) {
    std::stringstream es;
    es << e.rdbuf();
    echo = es.str();
  }
  open_out(dir / "summary.md") << summary_markdown(rec, echo);
}

}  // namespace tlab::harness
