#include "tlab/scm_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "tlab/error.hpp"

namespace tlab::scm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + msg);
}

int parse_int(std::string_view s, std::size_t line) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(line, "expected integer, got '" + std::string(s) + "'");
  return v;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) fail(line, "expected number, got '" + s + "'");
    return v;
  } catch (const std::invalid_argument&) {
    fail(line, "expected number, got '" + s + "'");
  } catch (const std::out_of_range&) {
    fail(line, "number out of range: '" + s + "'");
  }
}

// "key=a,b,c" -> {a,b,c}
std::vector<std::string> keyed_list(std::string_view field, std::string_view key, std::size_t line) {
  field = trim(field);
  if (field.substr(0, key.size() + 1) != std::string(key) + "=")
    fail(line, "expected '" + std::string(key) + "=...', got '" + std::string(field) + "'");
  return split(field.substr(key.size() + 1), ',');
}

struct PendingMechanism {
  std::string variable;
  Mechanism mechanism;
  std::vector<int> sizes;
  std::vector<bool> filled;
  std::size_t declared_line = 0;
};

void finish(DiscreteScm& scm, PendingMechanism& pending) {
  for (std::size_t r = 0; r < pending.filled.size(); ++r) {
    if (!pending.filled[r]) {
      fail(pending.declared_line, "mechanism of '" + pending.variable + "' is not total: row " +
                                      std::to_string(r) + " of " + std::to_string(pending.filled.size()) +
                                      " is missing");
    }
  }
  scm.set_mechanism(pending.variable, std::move(pending.mechanism));
}

}  // namespace

DiscreteScm parse_scm(std::string_view text) {
  DiscreteScm scm;
  std::optional<PendingMechanism> pending;
  bool started = false;
  bool ended = false;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (ended) fail(line_no, "content after 'end'");

    if (line.starts_with("parents=")) {
      if (!pending) fail(line_no, "table row outside a mechanism block");
      const std::vector<std::string> fields = split(line, ';');
      if (fields.size() != 3) fail(line_no, "row must be 'parents=...; exo=...; value=...'");
      const std::vector<std::string> pv = keyed_list(fields[0], "parents", line_no);
      const std::vector<std::string> ev = keyed_list(fields[1], "exo", line_no);
      const std::vector<std::string> vv = keyed_list(fields[2], "value", line_no);
      const Mechanism& m = pending->mechanism;
      if (pv.size() != m.parents.size() || ev.size() != m.exogenous.size() || vv.size() != 1)
        fail(line_no, "row arity does not match mechanism inputs");
      std::size_t row = 0;
      std::size_t k = 0;
      for (const auto* list : {&pv, &ev}) {
        for (const std::string& s : *list) {
          const int v = parse_int(s, line_no);
          if (v < 0 || v >= pending->sizes[k]) fail(line_no, "input value " + s + " outside its domain");
          row = row * static_cast<std::size_t>(pending->sizes[k]) + static_cast<std::size_t>(v);
          ++k;
        }
      }
      if (pending->filled[row]) fail(line_no, "duplicate row for mechanism of '" + pending->variable + "'");
      pending->filled[row] = true;
      pending->mechanism.table[row] = parse_int(vv[0], line_no);
      continue;
    }

    const std::vector<std::string> w = words(line);
    const std::string& kw = w[0];
    if (kw == "scm") {
      if (started) fail(line_no, "duplicate 'scm' header");
      if (w.size() != 2) fail(line_no, "expected 'scm <name>'");
      scm.set_name(w[1]);
      started = true;
      continue;
    }
    if (!started) fail(line_no, "file must begin with 'scm <name>'");
    if (pending && kw != "mechanism" && kw != "end") fail(line_no, "declarations must precede mechanisms");
    if (kw == "variable") {
      if (w.size() != 3) fail(line_no, "expected 'variable <name> <domain size>'");
      scm.add_variable(w[1], parse_int(w[2], line_no));
    } else if (kw == "exogenous") {
      if (w.size() < 3) fail(line_no, "expected 'exogenous <name> <p0> ...'");
      std::vector<double> probs;
      for (std::size_t i = 2; i < w.size(); ++i) probs.push_back(parse_double(w[i], line_no));
      scm.add_exogenous(w[1], std::move(probs));
    } else if (kw == "mechanism") {
      if (pending) finish(scm, *pending);
      if (w.size() < 2 || w.size() > 4) fail(line_no, "expected 'mechanism <var> parents=... exo=...'");
      if (!scm.variable_index(w[1])) fail(line_no, "mechanism for undeclared variable '" + w[1] + "'");
      PendingMechanism p;
      p.variable = w[1];
      p.declared_line = line_no;
      p.mechanism.parents = keyed_list(w.size() > 2 ? w[2] : "parents=", "parents", line_no);
      p.mechanism.exogenous = keyed_list(w.size() > 3 ? w[3] : "exo=", "exo", line_no);
      for (const auto& name : p.mechanism.parents) {
        if (!scm.variable_index(name)) fail(line_no, "unknown parent '" + name + "'");
        p.sizes.push_back(scm.domain(name));
      }
      for (const auto& name : p.mechanism.exogenous) {
        if (!scm.exogenous_index(name)) fail(line_no, "unknown exogenous input '" + name + "'");
        p.sizes.push_back(scm.domain(name));
      }
      std::size_t rows = 1;
      for (int s : p.sizes) rows *= static_cast<std::size_t>(s);
      p.mechanism.table.assign(rows, 0);
      p.filled.assign(rows, false);
      pending = std::move(p);
    } else if (kw == "end") {
      if (pending) finish(scm, *pending);
      pending.reset();
      ended = true;
    } else {
      fail(line_no, "unknown keyword '" + kw + "'");
    }
  }
  if (!started) throw Error(ErrorCode::kParse, "empty SCM document");
  if (pending) finish(scm, *pending);
  for (std::size_t v = 0; v < scm.variables().size(); ++v) {
    const Mechanism& m = scm.mechanisms()[v];
    if (m.table.empty())
      throw Error(ErrorCode::kParse, "variable '" + scm.variables()[v].name + "' has no mechanism");
  }
  return scm;
}

std::string format_scm(const DiscreteScm& scm) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "scm " << (scm.name().empty() ? "unnamed" : scm.name()) << "\n";
  for (const Variable& v : scm.variables()) out << "variable " << v.name << " " << v.domain << "\n";
  for (const Exogenous& e : scm.exogenous()) {
    out << "exogenous " << e.name;
    for (double p : e.probs) out << " " << p;
    out << "\n";
  }
  auto list = [](const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
    return s;
  };
  for (std::size_t v = 0; v < scm.variables().size(); ++v) {
    const Mechanism& m = scm.mechanisms()[v];
    out << "mechanism " << scm.variables()[v].name << " parents=" << list(m.parents)
        << " exo=" << list(m.exogenous) << "\n";
    std::vector<int> sizes;
    for (const auto& p : m.parents) sizes.push_back(scm.domain(p));
    for (const auto& e : m.exogenous) sizes.push_back(scm.domain(e));
    std::vector<int> inputs(sizes.size(), 0);
    for (std::size_t r = 0; r < m.table.size(); ++r) {
      out << "parents=";
      for (std::size_t k = 0; k < m.parents.size(); ++k) out << (k ? "," : "") << inputs[k];
      out << "; exo=";
      for (std::size_t k = 0; k < m.exogenous.size(); ++k) out << (k ? "," : "") << inputs[m.parents.size() + k];
      out << "; value=" << m.table[r] << "\n";
      for (std::size_t k = sizes.size(); k-- > 0;) {
        if (++inputs[k] < sizes[k]) break;
        inputs[k] = 0;
      }
    }
  }
  out << "end\n";
  return out.str();
}

DiscreteScm load_scm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open SCM file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scm(buf.str());
}

void save_scm(const DiscreteScm& scm, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write SCM file " + path.string());
  out << format_scm(scm);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace tlab::scm
