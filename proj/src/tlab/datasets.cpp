#include "tlab/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tlab/binary_io.hpp"
#include "tlab/random.hpp"

namespace tlab::datasets {

namespace {

using Glyph = std::array<const char*, 8>;

constexpr std::array<Glyph, 10> kDigits = {{
    {"..XXXX..", ".XX..XX.", ".XX.XXX.", ".XXXXXX.", ".XXX.XX.", ".XX..XX.", "..XXXX..", "........"},
    {"...XX...", "..XXX...", "...XX...", "...XX...", "...XX...", "...XX...", ".XXXXXX.", "........"},
    {"..XXXX..", ".XX..XX.", ".....XX.", "....XX..", "...XX...", "..XX....", ".XXXXXX.", "........"},
    {"..XXXX..", ".XX..XX.", ".....XX.", "...XXX..", ".....XX.", ".XX..XX.", "..XXXX..", "........"},
    {"....XX..", "...XXX..", "..XXXX..", ".XX.XX..", ".XXXXXX.", "....XX..", "....XX..", "........"},
    {".XXXXXX.", ".XX.....", ".XXXXX..", ".....XX.", ".....XX.", ".XX..XX.", "..XXXX..", "........"},
    {"..XXXX..", ".XX.....", ".XXXXX..", ".XX..XX.", ".XX..XX.", ".XX..XX.", "..XXXX..", "........"},
    {".XXXXXX.", ".....XX.", "....XX..", "...XX...", "..XX....", "..XX....", "..XX....", "........"},
    {"..XXXX..", ".XX..XX.", ".XX..XX.", "..XXXX..", ".XX..XX.", ".XX..XX.", "..XXXX..", "........"},
    {"..XXXX..", ".XX..XX.", ".XX..XX.", "..XXXXX.", ".....XX.", "....XX..", "..XXX...", "........"},
}};

// Three poses per class; class 0 perches (round body, legs), class 1 swims
// (long neck, flat body).
constexpr std::array<Glyph, 6> kBirds = {{
    {"........", "..XXX...", ".XXXXX..", ".XXXXXX.", "..XXXXX.", "...X.X..", "...X.X..", "........"},
    {"........", "...XX...", "..XXXX..", ".XXXXXX.", "XXXXXX..", "..X.X...", "..X.X...", "........"},
    {"..XX....", ".XXXX...", "..XXXXX.", "..XXXXXX", "...XXXX.", "....X...", "...XX...", "........"},
    {"XX......", ".X......", ".X......", ".XX.....", ".XXXXXXX", "..XXXXXX", "...XXXX.", "........"},
    {".XX.....", "..X.....", "..X.....", "..X.....", "..XXXXX.", ".XXXXXXX", "..XXXXX.", "........"},
    {"........", "XX......", ".X......", ".XXXXX..", "..XXXXXX", "..XXXXXX", "........", "........"},
}};

constexpr std::array<std::array<double, 3>, 4> kPlumage = {{
    {0.55, 0.35, 0.2}, {0.95, 0.95, 0.9}, {0.15, 0.15, 0.15}, {0.9, 0.8, 0.2},
}};

constexpr std::array<std::array<double, 3>, 10> kPalette = {{
    {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1},
    {0, 1, 1}, {1, 0.5, 0}, {0.5, 0, 1}, {0, 0.5, 0.5}, {0.5, 0.5, 0.5},
}};

constexpr std::size_t kGlyphSize = 8;

enum SplitTag : std::uint64_t { kTrain = 1, kVal = 2, kTest = 3, kOod = 4 };

struct Canvas {
  const neural::ImageShape& shape;
  double* px;

  double& at(std::size_t r, std::size_t c, std::size_t ch) { return px[(r * shape.width + c) * shape.channels + ch]; }
  void fill(const std::array<double, 3>& rgb) {
    for (std::size_t r = 0; r < shape.height; ++r)
      for (std::size_t c = 0; c < shape.width; ++c)
        for (std::size_t ch = 0; ch < 3; ++ch) at(r, c, ch) = rgb[ch];
  }
  void stamp(const Glyph& g, std::size_t top, std::size_t left, const std::array<double, 3>& rgb,
             bool mirror = false) {
    for (std::size_t a = 0; a < kGlyphSize; ++a)
      for (std::size_t b = 0; b < kGlyphSize; ++b)
        if (g[a][mirror ? kGlyphSize - 1 - b : b] == 'X')
          for (std::size_t ch = 0; ch < 3; ++ch) at(top + a, left + b, ch) = rgb[ch];
  }
  void noise_and_clip(Rng& rng, double sigma) {
    const std::size_t n = shape.size();
    for (std::size_t i = 0; i < n; ++i) {
      double v = px[i];
      if (sigma > 0.0) v += sigma * rng.normal();
      px[i] = std::clamp(v, 0.0, 1.0);
    }
  }
};

std::pair<std::size_t, std::size_t> glyph_offset(const DatasetSpec& spec, Rng& rng) {
  const auto j = static_cast<std::size_t>(spec.jitter);
  const std::size_t base_r = (spec.shape.height - kGlyphSize - j) / 2;
  const std::size_t base_c = (spec.shape.width - kGlyphSize - j) / 2;
  const std::size_t dr = rng.index(j + 1);
  const std::size_t dc = rng.index(j + 1);
  return {base_r + dr, base_c + dc};
}

// Paired value with probability rho, otherwise uniform over the others.
int draw_attribute(int paired, int count, double rho, Rng& rng) {
  if (rng.bernoulli(rho)) return paired;
  const int other = static_cast<int>(rng.index(static_cast<std::size_t>(count - 1)));
  return other >= paired ? other + 1 : other;
}

Split make_split(const std::string& name, const DatasetSpec& spec, std::size_t n, std::uint64_t first_id) {
  Split s;
  s.name = name;
  s.shape = spec.shape;
  s.pixels = neural::Tensor({n, spec.shape.size()});
  s.labels.resize(n);
  s.attributes.resize(n);
  s.groups.resize(n);
  s.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.ids[i] = first_id + i;
  return s;
}

template <typename Render>
DatasetSplits generate_splits(const DatasetSpec& spec, Render&& render) {
  DatasetSplits out;
  std::uint64_t next = 0;
  auto build = [&](Split& s, const char* name, std::size_t n, SplitTag tag) {
    s = make_split(name, spec, n, next);
    next += n;
    for (std::size_t i = 0; i < n; ++i) render(s, i, tag);
  };
  build(out.train, "train", spec.n_train, kTrain);
  build(out.val, "val", spec.n_val, kVal);
  build(out.test, "test", spec.n_test, kTest);
  build(out.ood, "ood", spec.n_ood, kOod);
  return out;
}

}  // namespace

const char* dataset_kind_name(DatasetKind kind) { return kind == DatasetKind::kCmnist ? "cmnist" : "waterbird"; }

void DatasetSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kSpec, m); };
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (kind == DatasetKind::kCmnist && num_classes > 10) fail("CMNIST-like data supports at most 10 classes");
  if (kind == DatasetKind::kWaterbird && num_classes != 2) fail("WaterBird-like data has exactly 2 classes");
  if (!(rho_train >= 0.0 && rho_train <= 1.0)) fail("rho_train must lie in [0, 1]");
  if (rho_ood && !(*rho_ood >= 0.0 && *rho_ood <= 1.0)) fail("rho_ood must lie in [0, 1]");
  if (shape.channels != 3) fail("images must have 3 channels");
  if (jitter < 0) fail("jitter must be >= 0");
  if (shape.height < kGlyphSize + static_cast<std::size_t>(jitter) ||
      shape.width < kGlyphSize + static_cast<std::size_t>(jitter))
    fail("image side must be at least 8 + jitter");
  if (!(noise >= 0.0)) fail("noise must be >= 0");
  if (n_train == 0) fail("train split must be nonempty");
}

std::string DatasetSpec::echo() const {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "kind = " << dataset_kind_name(kind) << "\n"
     << "classes = " << num_classes << "\n"
     << "image = " << shape.height << "x" << shape.width << "x" << shape.channels << "\n"
     << "rho_train = " << num(rho_train) << "\n"
     << "rho_ood = " << (rho_ood ? num(*rho_ood) : std::string(kind == DatasetKind::kCmnist ? "flipped" : "balanced")) << "\n"
     << "n_train = " << n_train << "\n"
     << "n_val = " << n_val << "\n"
     << "n_test = " << n_test << "\n"
     << "n_ood = " << n_ood << "\n"
     << "jitter = " << jitter << "\n"
     << "noise = " << num(noise) << "\n"
     << "coloring = " << (coloring == Coloring::kBackground ? "background" : "foreground") << "\n"
     << "foreground_only = " << (foreground_only ? "true" : "false") << "\n";
  return os.str();
}

DatasetSpec DatasetSpec::cmnist_default() { return DatasetSpec{}; }

DatasetSpec DatasetSpec::waterbird_default() {
  DatasetSpec s;
  s.kind = DatasetKind::kWaterbird;
  s.num_classes = 2;
  s.n_train = 4000;
  s.n_val = 800;
  s.n_test = 800;
  s.n_ood = 800;
  return s;
}

int num_attributes(const DatasetSpec& spec) { return spec.kind == DatasetKind::kCmnist ? spec.num_classes : 2; }

DatasetSplits gen_cmnist_like(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.kind != DatasetKind::kCmnist) throw Error(ErrorCode::kSpec, "spec is not a CMNIST-like spec");
  const int K = spec.num_classes;
  return generate_splits(spec, [&](Split& s, std::size_t i, SplitTag tag) {
    Rng rng(derive_seed(seed, {0xc3, s.ids[i]}));
    const int y = static_cast<int>(rng.index(static_cast<std::size_t>(K)));
    int color;
    if (tag == kOod && !spec.rho_ood) {
      color = (y + 1) % K;
    } else {
      color = draw_attribute(y, K, tag == kOod ? *spec.rho_ood : spec.rho_train, rng);
    }
    const auto& c = kPalette[static_cast<std::size_t>(color)];
    const std::array<double, 3> tint{0.8 * c[0] + 0.1, 0.8 * c[1] + 0.1, 0.8 * c[2] + 0.1};
    Canvas canvas{s.shape, s.pixels.data() + i * s.shape.size()};
    const auto [top, left] = glyph_offset(spec, rng);
    if (spec.coloring == Coloring::kBackground) {
      canvas.fill(tint);
      canvas.stamp(kDigits[static_cast<std::size_t>(y)], top, left, {1.0, 1.0, 1.0});
    } else {
      canvas.fill({0.0, 0.0, 0.0});
      canvas.stamp(kDigits[static_cast<std::size_t>(y)], top, left, tint);
    }
    canvas.noise_and_clip(rng, spec.noise);
    s.labels[i] = y;
    s.attributes[i] = color;
    s.groups[i] = y * K + color;
  });
}

DatasetSplits gen_waterbird_like(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.kind != DatasetKind::kWaterbird) throw Error(ErrorCode::kSpec, "spec is not a WaterBird-like spec");
  return generate_splits(spec, [&](Split& s, std::size_t i, SplitTag tag) {
    Rng rng(derive_seed(seed, {0xb1, s.ids[i]}));
    int y, water;
    if (tag == kOod && !spec.rho_ood) {
      // Balanced groups in a fixed cycle.
      y = static_cast<int>(i % 2);
      water = static_cast<int>((i / 2) % 2);
    } else {
      y = static_cast<int>(rng.index(2));
      water = draw_attribute(y, 2, tag == kOod ? *spec.rho_ood : spec.rho_train, rng);
    }
    Canvas canvas{s.shape, s.pixels.data() + i * s.shape.size()};
    if (spec.foreground_only) {
      canvas.fill({0.5, 0.5, 0.5});
    } else if (water) {
      const double phase = rng.uniform(0.0, 6.28);
      for (std::size_t r = 0; r < s.shape.height; ++r) {
        const double w = 0.5 + 0.25 * std::sin(static_cast<double>(r) * 1.2 + phase);
        for (std::size_t c = 0; c < s.shape.width; ++c) {
          canvas.at(r, c, 0) = 0.1;
          canvas.at(r, c, 1) = 0.3 * w + 0.1;
          canvas.at(r, c, 2) = 0.5 + 0.4 * w;
        }
      }
    } else {
      for (std::size_t r = 0; r < s.shape.height; ++r)
        for (std::size_t c = 0; c < s.shape.width; ++c) {
          const double sp = rng.uniform();
          canvas.at(r, c, 0) = 0.3 + 0.3 * sp;
          canvas.at(r, c, 1) = 0.5 + 0.2 * sp;
          canvas.at(r, c, 2) = 0.1 + 0.1 * sp;
        }
    }
    const auto [top, left] = glyph_offset(spec, rng);
    const auto& glyph = kBirds[static_cast<std::size_t>(y) * 3 + rng.index(3)];
    const auto& plumage = kPlumage[rng.index(kPlumage.size())];
    const double shade = rng.uniform(0.8, 1.0);
    canvas.stamp(glyph, top, left, {shade * plumage[0], shade * plumage[1], shade * plumage[2]}, rng.index(2) == 1);
    canvas.noise_and_clip(rng, spec.noise);
    s.labels[i] = y;
    s.attributes[i] = water;
    s.groups[i] = y * 2 + water;
  });
}

DatasetSplits generate(const DatasetSpec& spec, std::uint64_t seed) {
  return spec.kind == DatasetKind::kCmnist ? gen_cmnist_like(spec, seed) : gen_waterbird_like(spec, seed);
}

double pairing_rate(const Split& split) {
  if (split.size() == 0) return 0.0;
  std::size_t paired = 0;
  for (std::size_t i = 0; i < split.size(); ++i) paired += split.attributes[i] == split.labels[i];
  return static_cast<double>(paired) / static_cast<double>(split.size());
}

namespace {
constexpr char kMagic[8] = {'T', 'L', 'A', 'B', 'D', 'S', 'E', 'T'};
}

void save_split(const Split& split, const DatasetSpec& spec, std::uint64_t seed, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    out.write(kMagic, 8);
    binary::put_u32(out, kDatasetVersion);
    binary::put_string(out, spec.echo());
    binary::put_u64(out, seed);
    binary::put_string(out, split.name);
    binary::put_u32(out, static_cast<std::uint32_t>(split.shape.height));
    binary::put_u32(out, static_cast<std::uint32_t>(split.shape.width));
    binary::put_u32(out, static_cast<std::uint32_t>(split.shape.channels));
    binary::put_u64(out, split.size());
    const std::size_t d = split.shape.size();
    for (std::size_t i = 0; i < split.size(); ++i) {
      binary::put_u64(out, split.ids[i]);
      binary::put_u32(out, static_cast<std::uint32_t>(split.labels[i]));
      binary::put_u32(out, static_cast<std::uint32_t>(split.attributes[i]));
      binary::put_u32(out, static_cast<std::uint32_t>(split.groups[i]));
      out.write(reinterpret_cast<const char*>(split.pixels.data() + i * d), static_cast<std::streamsize>(d * 8));
    }
    if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
  }
  std::ofstream csv(path.string() + ".csv");
  if (!csv) throw Error(ErrorCode::kIo, "cannot write " + path.string() + ".csv");
  csv << "index,id,label,attribute,group\n";
  for (std::size_t i = 0; i < split.size(); ++i)
    csv << i << ',' << split.ids[i] << ',' << split.labels[i] << ',' << split.attributes[i] << ',' << split.groups[i] << '\n';
}

LoadedSplit load_split(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  char magic[8];
  binary::get_raw(in, magic, 8);
  if (!std::equal(magic, magic + 8, kMagic)) throw Error(ErrorCode::kCorruptFile, path.string() + " is not a dataset file");
  const std::uint32_t version = binary::get_u32(in);
  if (version != kDatasetVersion)
    throw Error(ErrorCode::kVersion, "dataset format version " + std::to_string(version) + " is not supported (expected " +
                                         std::to_string(kDatasetVersion) + ")");
  LoadedSplit out;
  out.spec_echo = binary::get_string(in);
  out.seed = binary::get_u64(in);
  Split& s = out.split;
  s.name = binary::get_string(in, 256);
  s.shape.height = binary::get_u32(in);
  s.shape.width = binary::get_u32(in);
  s.shape.channels = binary::get_u32(in);
  const std::uint64_t n = binary::get_u64(in);
  const std::size_t d = s.shape.size();
  if (d == 0 || d > (1u << 20) || n > (1u << 26)) throw Error(ErrorCode::kCorruptFile, "implausible dataset header");
  s.pixels = neural::Tensor({n, d});
  s.labels.resize(n);
  s.attributes.resize(n);
  s.groups.resize(n);
  s.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.ids[i] = binary::get_u64(in);
    s.labels[i] = static_cast<int>(binary::get_u32(in));
    s.attributes[i] = static_cast<int>(binary::get_u32(in));
    s.groups[i] = static_cast<int>(binary::get_u32(in));
    binary::get_raw(in, s.pixels.data() + i * d, d * 8);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::kCorruptFile, "trailing bytes after last record");
  return out;
}

}  // namespace tlab::datasets
