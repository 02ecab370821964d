#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bisim/types.hpp"

namespace bisim {

/// Library version string recorded in run summaries.
const char* library_version();

enum class ElementType : std::uint8_t { kComplex64 = 1, kFloat64 = 2 };

/// Axis descriptor. `values` is either empty (plain index axis) or holds one
/// coordinate per element along the dimension.
struct Axis {
  std::string name;
  std::string unit;
  std::vector<double> values;

  bool operator==(const Axis&) const = default;
};

struct Dataset {
  std::string name;
  ElementType type = ElementType::kFloat64;
  std::vector<std::uint64_t> shape;
  std::vector<Axis> axes;  // one per dimension
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::complex<float>> complex_values;  // kComplex64 payload
  std::vector<double> real_values;                  // kFloat64 payload

  static Dataset complex64(std::string name, std::vector<std::uint64_t> shape, std::vector<Axis> axes,
                           std::span<const Complex> values);
  static Dataset float64(std::string name, std::vector<std::uint64_t> shape, std::vector<Axis> axes,
                         std::vector<double> values);

  std::uint64_t element_count() const;
  const std::string* attribute(const std::string& key) const;
  /// Throws IoError when shape, axes and payload disagree.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

/// Self-describing little-endian container:
///   "BISIM1" u16 version u32 n_datasets, then per dataset
///   name, u8 element type, u32 ndim, u64 sizes[ndim],
///   per axis (name, unit, u64 n_values, f64 values[n]),
///   u32 n_attributes (key, value)…, u64 payload bytes, payload.
/// Strings are u32 length + UTF-8 bytes. complex64 is interleaved float32 (re, im).
class ResultArchive {
 public:
  static constexpr std::uint16_t kFormatVersion = 1;

  void add(Dataset dataset);
  const Dataset& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<Dataset>& datasets() const { return datasets_; }

  std::vector<std::uint8_t> encode() const;
  static ResultArchive decode(std::span<const std::uint8_t> bytes);

  void write(const std::filesystem::path& path) const;
  static ResultArchive read(const std::filesystem::path& path);

  bool operator==(const ResultArchive&) const = default;

 private:
  std::vector<Dataset> datasets_;
};

/// Writes a ≤ 2-D dataset as CSV. 1-D: two columns (axis, value); 2-D: a
/// header row of column-axis values and one row per row-axis value. Complex
/// data is written as 20·log10|x| (−300 dB floor); floats with 17
/// significant digits. Throws UsageError for higher-rank datasets.
void export_csv(const ResultArchive& archive, const std::string& dataset,
                const std::filesystem::path& path);

}  // namespace bisim
