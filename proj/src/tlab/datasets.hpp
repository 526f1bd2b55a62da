#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tlab/readout.hpp"
#include "tlab/tensor.hpp"

namespace tlab::datasets {

enum class DatasetKind { kCmnist, kWaterbird };

// Which part of a CMNIST-like image carries the spurious color.
enum class Coloring { kBackground, kForeground };

const char* dataset_kind_name(DatasetKind kind);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kCmnist;
  int num_classes = 10;
  neural::ImageShape shape{16, 16, 3};
  // Probability that the spurious attribute takes the class's paired value.
  double rho_train = 0.95;
  // Unset: CMNIST uses the flipped pairing (class k -> color k+1) and
  // WaterBird balanced groups.
  std::optional<double> rho_ood;
  std::size_t n_train = 6000;
  std::size_t n_val = 1000;
  std::size_t n_test = 1000;
  std::size_t n_ood = 1000;
  // Maximum glyph offset in pixels along each axis.
  int jitter = 3;
  double noise = 0.1;
  Coloring coloring = Coloring::kBackground;
  // WaterBird-like only: constant backgrounds.
  bool foreground_only = false;

  // Throws kSpec.
  void validate() const;
  // Canonical key = value text, used as provenance in dataset files.
  std::string echo() const;

  static DatasetSpec cmnist_default();
  static DatasetSpec waterbird_default();
};

struct Split {
  std::string name;
  neural::ImageShape shape;
  // n x (height * width * channels), values in [0, 1], channels last.
  neural::Tensor pixels;
  std::vector<int> labels;
  // Spurious attribute: color index (CMNIST) or background (WaterBird: 0 land, 1 water).
  std::vector<int> attributes;
  // label * num_attributes + attribute.
  std::vector<int> groups;
  // Global sample index; distinct across the splits of one dataset.
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return labels.size(); }
};

struct DatasetSplits {
  Split train;
  Split val;
  Split test;  // in-distribution, same law as train
  Split ood;
};

DatasetSplits gen_cmnist_like(const DatasetSpec& spec, std::uint64_t seed);
DatasetSplits gen_waterbird_like(const DatasetSpec& spec, std::uint64_t seed);
DatasetSplits generate(const DatasetSpec& spec, std::uint64_t seed);

int num_attributes(const DatasetSpec& spec);

// Fraction of samples whose attribute equals the class's paired value.
double pairing_rate(const Split& split);

// Binary split file: magic "TLABDSET", u32 version, spec echo (u32 length +
// bytes), u64 seed, split name, u32 height, width, channels, u64 count, then
// per sample: u64 id, i32 label, i32 attribute, i32 group, pixels as f64.
inline constexpr std::uint32_t kDatasetVersion = 1;

// Also writes `<path>.csv` with index,id,label,attribute,group.
void save_split(const Split& split, const DatasetSpec& spec, std::uint64_t seed, const std::filesystem::path& path);

struct LoadedSplit {
  Split split;
  std::string spec_echo;
  std::uint64_t seed = 0;
};

// Throws kCorruptFile for truncated or malformed files, kVersion for another
// format version, kIo when unreadable.
LoadedSplit load_split(const std::filesystem::path& path);

}  // namespace tlab::datasets
