#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "tlab/datasets.hpp"
#include "tlab/error.hpp"

using namespace tlab;
using namespace tlab::datasets;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "tlab_test_datasets";
  std::filesystem::create_directories(dir);
  return dir / name;
}

double fraction(const std::vector<int>& v, const std::function<bool(std::size_t)>& pred) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) n += pred(i) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("CMNIST-like: calibrated spurious pairing") {
  const auto spec = DatasetSpec::cmnist_default();
  const auto d = gen_cmnist_like(spec, 3);
  CHECK(d.train.size() == spec.n_train);
  CHECK(std::abs(pairing_rate(d.train) - 0.95) <= 0.02);
  CHECK(std::abs(pairing_rate(d.test) - 0.95) <= 0.02);
  // Flipped pairing: class k always shows color k + 1.
  for (std::size_t i = 0; i < d.ood.size(); ++i) CHECK(d.ood.attributes[i] == (d.ood.labels[i] + 1) % 10);
  CHECK(pairing_rate(d.train) - pairing_rate(d.ood) >= 0.5);

  auto uniform = spec;
  uniform.rho_train = 0.1;
  CHECK(std::abs(pairing_rate(gen_cmnist_like(uniform, 4).train) - 0.1) <= 0.02);
}

TEST_CASE("CMNIST-like: labels, groups and pixel range") {
  auto spec = DatasetSpec::cmnist_default();
  spec.n_train = 2000;
  const auto d = gen_cmnist_like(spec, 5);
  std::map<int, std::size_t> per_class;
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    ++per_class[d.train.labels[i]];
    CHECK(d.train.groups[i] == d.train.labels[i] * 10 + d.train.attributes[i]);
  }
  CHECK(per_class.size() == 10);
  for (const auto& [k, n] : per_class) CHECK(std::abs(static_cast<double>(n) / 2000.0 - 0.1) <= 0.03);
  const auto& px = d.train.pixels.values();
  CHECK(*std::min_element(px.begin(), px.end()) >= 0.0);
  CHECK(*std::max_element(px.begin(), px.end()) <= 1.0);
}

TEST_CASE("deterministic in the seed, distinct across seeds") {
  auto spec = DatasetSpec::cmnist_default();
  spec.n_train = 300;
  const auto a = gen_cmnist_like(spec, 7);
  const auto b = gen_cmnist_like(spec, 7);
  const auto c = gen_cmnist_like(spec, 8);
  CHECK(a.train.pixels == b.train.pixels);
  CHECK(a.ood.labels == b.ood.labels);
  CHECK(a.train.pixels != c.train.pixels);

  const auto w = DatasetSpec::waterbird_default();
  CHECK(gen_waterbird_like(w, 1).train.pixels == gen_waterbird_like(w, 1).train.pixels);
}

TEST_CASE("split ids are disjoint") {
  const auto d = generate(DatasetSpec::waterbird_default(), 2);
  std::set<std::uint64_t> seen;
  std::size_t total = 0;
  for (const Split* s : {&d.train, &d.val, &d.test, &d.ood}) {
    seen.insert(s->ids.begin(), s->ids.end());
    total += s->size();
  }
  CHECK(seen.size() == total);
}

TEST_CASE("WaterBird-like: minority rate and balanced OOD groups") {
  const auto spec = DatasetSpec::waterbird_default();
  const auto d = gen_waterbird_like(spec, 9);
  const double minority = fraction(d.train.labels, [&](std::size_t i) { return d.train.attributes[i] != d.train.labels[i]; });
  CHECK(std::abs(minority - 0.05) <= 0.01);
  std::map<int, std::size_t> groups;
  for (int g : d.ood.groups) ++groups[g];
  CHECK(groups.size() == 4);
  const double expected = static_cast<double>(d.ood.size()) / 4.0;
  for (const auto& [g, n] : groups) CHECK(std::abs(static_cast<double>(n) - expected) <= 1.0);
  CHECK(std::abs(pairing_rate(d.ood) - 0.5) <= 0.01);
  CHECK(pairing_rate(d.train) - pairing_rate(d.ood) >= 0.4);
}

TEST_CASE("WaterBird-like: background carries the attribute") {
  // Oracle: water backgrounds are blue-dominant, land backgrounds are not.
  auto spec = DatasetSpec::waterbird_default();
  spec.n_train = 400;
  spec.noise = 0.0;
  const auto d = gen_waterbird_like(spec, 10);
  const auto& sh = d.train.shape;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    double blue = 0.0, red = 0.0;
    for (std::size_t c = 0; c < sh.width; ++c) {
      const double* p = d.train.pixels.data() + i * sh.size() + c * sh.channels;
      red += p[0];
      blue += p[2];
    }
    agree += (blue > red) == (d.train.attributes[i] == 1) ? 1 : 0;
  }
  CHECK(static_cast<double>(agree) / 400.0 >= 0.95);
}

TEST_CASE("foreground-only control has constant backgrounds") {
  auto spec = DatasetSpec::waterbird_default();
  spec.n_train = 50;
  spec.foreground_only = true;
  spec.noise = 0.0;
  const auto d = gen_waterbird_like(spec, 11);
  for (std::size_t i = 0; i < d.train.size(); ++i) CHECK(d.train.pixels.at(i, 0) == doctest::Approx(0.5));
}

TEST_CASE("spec validation") {
  auto s = DatasetSpec::cmnist_default();
  s.num_classes = 11;
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::kSpec);
  s = DatasetSpec::cmnist_default();
  s.rho_train = 1.5;
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::kSpec);
  s = DatasetSpec::cmnist_default();
  s.shape = {8, 8, 3};
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::kSpec);
  auto w = DatasetSpec::waterbird_default();
  w.num_classes = 3;
  CHECK(code_of([&] { w.validate(); }) == ErrorCode::kSpec);
  CHECK(code_of([&] { gen_waterbird_like(DatasetSpec::cmnist_default(), 1); }) == ErrorCode::kSpec);
}

TEST_CASE("split file round trip and corruption") {
  auto spec = DatasetSpec::cmnist_default();
  spec.n_train = 40;
  spec.n_val = spec.n_test = spec.n_ood = 5;
  const auto d = gen_cmnist_like(spec, 12);
  const auto path = temp_path("train.bin");
  save_split(d.train, spec, 12, path);
  CHECK(std::filesystem::exists(path.string() + ".csv"));
  const auto loaded = load_split(path);
  CHECK(loaded.seed == 12);
  CHECK(loaded.spec_echo == spec.echo());
  CHECK(loaded.split.pixels == d.train.pixels);
  CHECK(loaded.split.labels == d.train.labels);
  CHECK(loaded.split.attributes == d.train.attributes);
  CHECK(loaded.split.groups == d.train.groups);
  CHECK(loaded.split.ids == d.train.ids);
  CHECK(loaded.split.shape == d.train.shape);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto cut = temp_path("cut.bin");
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() - 17);
  CHECK(code_of([&] { load_split(cut); }) == ErrorCode::kCorruptFile);

  auto v = bytes;
  v[8] = static_cast<char>(kDatasetVersion + 1);
  const auto vpath = temp_path("version.bin");
  std::ofstream(vpath, std::ios::binary) << v;
  CHECK(code_of([&] { load_split(vpath); }) == ErrorCode::kVersion);

  CHECK(code_of([&] { load_split(temp_path("missing.bin")); }) == ErrorCode::kIo);
}
