#include "dbnmix/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "binary_io.hpp"
#include "dbnmix/errors.hpp"
#include "dbnmix/rng.hpp"

namespace dbnmix {

namespace {

constexpr char kMagic[4] = {'L', 'T', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

std::size_t rounded_count(double value) { return static_cast<std::size_t>(std::llround(value)); }

}  // namespace

std::string_view group_name(Group g) {
  switch (g) {
    case Group::Many: return "many";
    case Group::Medium: return "medium";
    case Group::Few: return "few";
  }
  return "?";
}

Group group_for_count(std::size_t count) {
  if (count > 100) return Group::Many;
  if (count >= 20) return Group::Medium;
  return Group::Few;
}

std::vector<std::size_t> LongTailSpec::counts() const {
  if (explicit_counts) {
    if (explicit_counts->empty()) throw InvalidSpecError("explicit profile has no classes");
    for (std::size_t k = 0; k < explicit_counts->size(); ++k) {
      if ((*explicit_counts)[k] == 0) {
        throw InvalidSpecError("explicit profile gives class " + std::to_string(k) + " zero samples");
      }
    }
    return *explicit_counts;
  }
  if (num_classes == 0) throw InvalidSpecError("long-tail profile needs at least one class");
  if (n_max == 0) throw InvalidSpecError("n_max must be positive");
  if (!(imbalance_ratio >= 1.0) || !std::isfinite(imbalance_ratio)) {
    throw InvalidSpecError("imbalance ratio must be a finite value >= 1");
  }
  std::vector<std::size_t> out(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double exponent =
        num_classes == 1 ? 0.0 : -static_cast<double>(k) / static_cast<double>(num_classes - 1);
    out[k] = rounded_count(static_cast<double>(n_max) * std::pow(imbalance_ratio, exponent));
    if (out[k] == 0) {
      throw InvalidSpecError("class " + std::to_string(k) + " rounds to zero samples");
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> Dataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(num_classes());
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

Dataset make_dataset(Tensor features, std::vector<std::uint32_t> labels, std::size_t num_classes) {
  if (features.rank() != 2) throw DimensionError("features must be an N x D matrix");
  if (features.rows() != labels.size()) {
    throw DimensionError(std::to_string(features.rows()) + " feature rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (num_classes == 0) throw InvalidSpecError("dataset needs at least one class");
  Dataset ds;
  ds.class_counts.assign(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw InvalidDatasetError("label " + std::to_string(labels[i]) + " out of range for " +
                                std::to_string(num_classes) + " classes");
    }
    ++ds.class_counts[labels[i]];
  }
  ds.group_of_class.reserve(num_classes);
  for (std::size_t c : ds.class_counts) ds.group_of_class.push_back(group_for_count(c));
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  return ds;
}

Tensor one_hot(std::span<const std::uint32_t> labels, std::size_t num_classes) {
  Tensor out({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) out(i, labels[i]) = 1.0;
  return out;
}

Dataset make_half_moons(std::size_t n_majority, double imbalance_ratio, double noise_sd,
                        std::uint64_t seed) {
  if (!(imbalance_ratio >= 1.0) || !std::isfinite(imbalance_ratio)) {
    throw InvalidSpecError("imbalance ratio must be a finite value >= 1");
  }
  if (!(noise_sd >= 0.0)) throw InvalidSpecError("noise sd must be non-negative");
  if (n_majority == 0) throw InvalidSpecError("majority class must be non-empty");
  const std::size_t n_minority = rounded_count(static_cast<double>(n_majority) / imbalance_ratio);
  if (n_minority == 0) throw InvalidSpecError("minority class rounds to zero samples");

  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t n = n_majority + n_minority;
  Tensor x({n, 2});
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool majority = i < n_majority;
    const double t = angle(rng);
    if (majority) {
      x(i, 0) = std::cos(t);
      x(i, 1) = std::sin(t);
    } else {
      x(i, 0) = kMoonOffsetX - std::cos(t);
      x(i, 1) = kMoonOffsetY - std::sin(t);
    }
    labels[i] = majority ? 0 : 1;
  }
  if (noise_sd > 0.0) {
    for (double& v : x.data()) v += noise_sd * noise(rng);
  }
  return make_dataset(std::move(x), std::move(labels), 2);
}

Tensor gaussian_centers(std::size_t num_classes, std::size_t dim, double class_sep) {
  Tensor centers({num_classes, dim});
  if (dim >= num_classes) {
    // Scaled simplex: sep / sqrt(2) * e_k, all pairs exactly class_sep apart.
    for (std::size_t k = 0; k < num_classes; ++k) centers(k, k) = class_sep / std::numbers::sqrt2;
    return centers;
  }
  if (dim == 1) {
    for (std::size_t k = 0; k < num_classes; ++k) centers(k, 0) = class_sep * static_cast<double>(k);
    return centers;
  }
  // Circle whose neighbouring centers are class_sep apart.
  const double radius = class_sep / (2.0 * std::sin(std::numbers::pi / static_cast<double>(num_classes)));
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(num_classes);
    centers(k, 0) = radius * std::cos(a);
    centers(k, 1) = radius * std::sin(a);
  }
  return centers;
}

Dataset make_gaussian_longtail(const LongTailSpec& spec, std::size_t dim, double class_sep,
                               std::uint64_t seed) {
  if (dim < 1) throw InvalidSpecError("feature dimension must be at least 1");
  if (!std::isfinite(class_sep)) throw InvalidSpecError("class separation must be finite");
  const std::vector<std::size_t> counts = spec.counts();
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  const Tensor centers = gaussian_centers(counts.size(), dim, class_sep);

  Rng rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Tensor x({n, dim});
  std::vector<std::uint32_t> labels(n);
  std::size_t row = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::size_t i = 0; i < counts[k]; ++i, ++row) {
      for (std::size_t d = 0; d < dim; ++d) x(row, d) = centers(k, d) + noise(rng);
      labels[row] = static_cast<std::uint32_t>(k);
    }
  }
  return make_dataset(std::move(x), std::move(labels), counts.size());
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
  const std::size_t d = dataset.dim();
  Tensor x({indices.size(), d});
  std::vector<std::uint32_t> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = dataset.features.row(indices[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
    labels[i] = dataset.labels[indices[i]];
  }
  return make_dataset(std::move(x), std::move(labels), dataset.num_classes());
}

Dataset truncate_to_longtail(const Dataset& dataset, const LongTailSpec& spec, std::uint64_t seed) {
  const std::vector<std::size_t> counts = spec.counts();
  if (counts.size() != dataset.num_classes()) {
    throw InvalidSpecError("profile has " + std::to_string(counts.size()) + " classes, dataset has " +
                           std::to_string(dataset.num_classes()));
  }
  auto by_class = dataset.indices_by_class();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (by_class[k].size() < counts[k]) {
      throw CapacityError(k, "class " + std::to_string(k) + " has " + std::to_string(by_class[k].size()) +
                                 " samples, profile needs " + std::to_string(counts[k]));
    }
  }
  Rng rng = make_rng(seed);
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    std::shuffle(by_class[k].begin(), by_class[k].end(), rng);
    keep.insert(keep.end(), by_class[k].begin(), by_class[k].begin() + static_cast<std::ptrdiff_t>(counts[k]));
  }
  std::shuffle(keep.begin(), keep.end(), rng);
  return subset(dataset, keep);
}

DatasetFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".ltds" || ext == ".bin") ? DatasetFormat::PackedBinary : DatasetFormat::Csv;
}

namespace {

void save_csv(const Dataset& ds, std::ostream& os) {
  const std::size_t d = ds.dim();
  for (std::size_t j = 0; j < d; ++j) os << 'f' << j << ',';
  os << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) os << detail::format_double(ds.features(i, j)) << ',';
    os << ds.labels[i] << '\n';
  }
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

Dataset load_csv(std::istream& is, std::optional<std::size_t> num_classes) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line)) throw ParseError(line_no, "missing header");
  const auto header = split_commas(trim(line));
  if (header.size() < 2 || trim(header.back()) != "label") {
    throw ParseError(line_no, "header must be f0,...,f{D-1},label");
  }
  const std::size_t d = header.size() - 1;

  std::vector<double> values;
  std::vector<std::uint32_t> labels;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto fields = split_commas(body);
    if (fields.size() != d + 1) {
      throw ParseError(line_no, "expected " + std::to_string(d + 1) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      const auto f = trim(fields[j]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(line_no, "bad feature value '" + std::string(f) + "'");
      }
      values.push_back(v);
    }
    const auto lf = trim(fields[d]);
    std::uint32_t label = 0;
    auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (ec != std::errc() || ptr != lf.data() + lf.size()) {
      throw ParseError(line_no, "bad label '" + std::string(lf) + "'");
    }
    if (num_classes && label >= *num_classes) {
      throw ParseError(line_no, "label " + std::to_string(label) + " out of range for " +
                                    std::to_string(*num_classes) + " classes");
    }
    labels.push_back(label);
  }
  std::size_t k = num_classes.value_or(0);
  if (!num_classes) {
    for (auto l : labels) k = std::max<std::size_t>(k, l + 1);
  }
  if (labels.empty()) throw ParseError(line_no, "no data rows");
  const std::size_t n = labels.size();
  return make_dataset(Tensor({n, d}, std::move(values)), std::move(labels), k);
}

void save_packed(const Dataset& ds, std::ostream& os) {
  os.write(kMagic, sizeof(kMagic));
  detail::write_le<std::uint16_t>(os, kVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.num_classes()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.size()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.dim()));
  for (std::size_t c : ds.class_counts) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c));
  for (double v : ds.features.data()) detail::write_f64(os, v);
  for (std::uint32_t l : ds.labels) detail::write_le<std::uint32_t>(os, l);
}

Dataset load_packed(std::istream& is) {
  char magic[4] = {};
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw IoError("not a packed dataset (bad magic)");
  }
  const auto version = detail::read_le<std::uint16_t>(is, "version");
  if (version != kVersion) throw IoError("unsupported packed dataset version " + std::to_string(version));
  const std::size_t k = detail::read_le<std::uint32_t>(is, "K");
  const std::size_t n = detail::read_le<std::uint32_t>(is, "N");
  const std::size_t d = detail::read_le<std::uint32_t>(is, "D");
  std::vector<std::size_t> counts(k);
  for (auto& c : counts) c = detail::read_le<std::uint32_t>(is, "class counts");
  std::vector<double> values(n * d);
  for (auto& v : values) v = detail::read_f64(is, "features");
  std::vector<std::uint32_t> labels(n);
  for (auto& l : labels) l = detail::read_le<std::uint32_t>(is, "labels");
  Dataset ds = make_dataset(Tensor({n, d}, std::move(values)), std::move(labels), k);
  if (ds.class_counts != counts) throw IoError("stored class counts disagree with labels");
  return ds;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  if (format == DatasetFormat::Csv) {
    save_csv(dataset, os);
  } else {
    save_packed(dataset, os);
  }
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     std::optional<std::size_t> num_classes) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  Dataset ds = format == DatasetFormat::Csv ? load_csv(is, num_classes) : load_packed(is);
  if (num_classes && ds.num_classes() != *num_classes) {
    throw InvalidDatasetError("dataset has " + std::to_string(ds.num_classes()) + " classes, expected " +
                              std::to_string(*num_classes));
  }
  return ds;
}

}  // namespace dbnmix
