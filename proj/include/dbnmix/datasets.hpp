#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "dbnmix/tensor.hpp"

namespace dbnmix {

enum class Group { Many, Medium, Few };

std::string_view group_name(Group g);

// Many: > 100 training samples, Medium: 20..100, Few: < 20.
Group group_for_count(std::size_t count);

// Long-tailed class-size profile. With `explicit_counts` set, K/n_max/ratio
// are ignored and the listed counts are used verbatim.
struct LongTailSpec {
  std::size_t num_classes = 10;
  std::size_t n_max = 500;
  double imbalance_ratio = 100.0;
  std::optional<std::vector<std::size_t>> explicit_counts;

  // N_k = round(n_max * ratio^(-k/(K-1))). Throws InvalidSpecError if any
  // count rounds to zero or a field is out of range.
  std::vector<std::size_t> counts() const;
};

struct Dataset {
  Tensor features;                  // N x D
  std::vector<std::uint32_t> labels;  // length N, values in [0, K)
  std::vector<std::size_t> class_counts;
  std::vector<Group> group_of_class;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  std::size_t num_classes() const noexcept { return class_counts.size(); }

  // Row indices of each class, in dataset order.
  std::vector<std::vector<std::size_t>> indices_by_class() const;
};

// Builds counts and groups from labels; validates shapes and label range.
Dataset make_dataset(Tensor features, std::vector<std::uint32_t> labels, std::size_t num_classes);

// One-hot row per label.
Tensor one_hot(std::span<const std::uint32_t> labels, std::size_t num_classes);

// Geometry of the two interleaved half-circles (unit radius, noise-free).
// Class 0 (majority): (cos t, sin t); class 1 (minority): (1 - cos t, 0.5 - sin t); t in [0, pi].
inline constexpr double kMoonOffsetX = 1.0;
inline constexpr double kMoonOffsetY = 0.5;

// Class 0 holds n_majority points, class 1 round(n_majority / ratio).
// Angles are uniform on [0, pi]; noise is isotropic Gaussian per coordinate.
Dataset make_half_moons(std::size_t n_majority, double imbalance_ratio, double noise_sd,
                        std::uint64_t seed);

// Class k ~ N(center_k, I). Centers are a scaled simplex when dim >= K, a
// circle in the first two coordinates when 2 <= dim < K, and a line when
// dim == 1; in every layout the closest pair of centers is class_sep apart.
// Centers do not depend on seed, so train and test sets drawn with different
// seeds share a distribution.
Dataset make_gaussian_longtail(const LongTailSpec& spec, std::size_t dim, double class_sep,
                               std::uint64_t seed);

Tensor gaussian_centers(std::size_t num_classes, std::size_t dim, double class_sep);

// Keeps a uniformly random N_k-subset of each class, then shuffles all rows.
Dataset truncate_to_longtail(const Dataset& dataset, const LongTailSpec& spec, std::uint64_t seed);

// Rows `indices` of `dataset` in that order; counts are recomputed.
Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices);

enum class DatasetFormat { Csv, PackedBinary };

// Picks PackedBinary for a ".ltds"/".bin" extension and Csv otherwise.
DatasetFormat format_for_path(const std::filesystem::path& path);

// CSV: header `f0,...,f{D-1},label`. Packed binary: "LTDS", u16 version, u32
// K, N, D, u32 counts[K], f64 features[N*D], u32 labels[N]; all little-endian.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format);
// For CSV, K is `num_classes` if given, else max label + 1.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     std::optional<std::size_t> num_classes = std::nullopt);

}  // namespace dbnmix
