#include "bisim/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bisim/errors.hpp"

#ifndef BISIM_VERSION_STRING
#define BISIM_VERSION_STRING "0.0.0"
#endif

namespace bisim {
namespace {

constexpr char kMagic[6] = {'B', 'I', 'S', 'I', 'M', '1'};

class Writer {
 public:
  template <typename T>
  void scalar(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }
  void string(const std::string& s) {
    scalar(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T scalar() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }
  std::string string() {
    const auto n = scalar<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("archive is truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string axis_label(const Axis& axis, std::size_t dim) {
  std::string label = axis.name.empty() ? "dim" + std::to_string(dim) : axis.name;
  if (!axis.unit.empty()) label += "_" + axis.unit;
  return label;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* library_version() { return BISIM_VERSION_STRING; }

Dataset Dataset::complex64(std::string name, std::vector<std::uint64_t> shape, std::vector<Axis> axes,
                           std::span<const Complex> values) {
  Dataset d;
  d.name = std::move(name);
  d.type = ElementType::kComplex64;
  d.shape = std::move(shape);
  d.axes = std::move(axes);
  d.complex_values.reserve(values.size());
  for (const auto& v : values) {
    d.complex_values.emplace_back(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  }
  d.validate();
  return d;
}

Dataset Dataset::float64(std::string name, std::vector<std::uint64_t> shape, std::vector<Axis> axes,
                         std::vector<double> values) {
  Dataset d;
  d.name = std::move(name);
  d.type = ElementType::kFloat64;
  d.shape = std::move(shape);
  d.axes = std::move(axes);
  d.real_values = std::move(values);
  d.validate();
  return d;
}

std::uint64_t Dataset::element_count() const {
  std::uint64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

const std::string* Dataset::attribute(const std::string& key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return &v;
  }
  return nullptr;
}

void Dataset::validate() const {
  if (name.empty()) throw IoError("dataset has no name");
  if (axes.size() != shape.size()) throw IoError("dataset '" + name + "': one axis per dimension required");
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (!axes[i].values.empty() && axes[i].values.size() != shape[i]) {
      throw IoError("dataset '" + name + "': axis '" + axes[i].name + "' length does not match its dimension");
    }
  }
  const std::uint64_t n = element_count();
  const bool ok = type == ElementType::kComplex64
                      ? complex_values.size() == n && real_values.empty()
                      : real_values.size() == n && complex_values.empty();
  if (!ok) throw IoError("dataset '" + name + "': payload length does not match its shape");
}

void ResultArchive::add(Dataset dataset) {
  dataset.validate();
  if (contains(dataset.name)) throw UsageError("archive already has a dataset named '" + dataset.name + "'");
  datasets_.push_back(std::move(dataset));
}

const Dataset& ResultArchive::get(const std::string& name) const {
  for (const auto& d : datasets_) {
    if (d.name == name) return d;
  }
  throw UsageError("archive has no dataset named '" + name + "'");
}

bool ResultArchive::contains(const std::string& name) const {
  return std::any_of(datasets_.begin(), datasets_.end(), [&](const Dataset& d) { return d.name == name; });
}

std::vector<std::uint8_t> ResultArchive::encode() const {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.scalar(kFormatVersion);
  w.scalar(static_cast<std::uint32_t>(datasets_.size()));
  for (const auto& d : datasets_) {
    d.validate();
    w.string(d.name);
    w.scalar(static_cast<std::uint8_t>(d.type));
    w.scalar(static_cast<std::uint32_t>(d.shape.size()));
    for (auto s : d.shape) w.scalar(s);
    for (const auto& a : d.axes) {
      w.string(a.name);
      w.string(a.unit);
      w.scalar(static_cast<std::uint64_t>(a.values.size()));
      for (double v : a.values) w.scalar(v);
    }
    w.scalar(static_cast<std::uint32_t>(d.attributes.size()));
    for (const auto& [k, v] : d.attributes) {
      w.string(k);
      w.string(v);
    }
    if (d.type == ElementType::kComplex64) {
      w.scalar(static_cast<std::uint64_t>(d.complex_values.size() * 8));
      for (const auto& c : d.complex_values) {
        w.scalar(c.real());
        w.scalar(c.imag());
      }
    } else {
      w.scalar(static_cast<std::uint64_t>(d.real_values.size() * 8));
      for (double v : d.real_values) w.scalar(v);
    }
  }
  return w.take();
}

ResultArchive ResultArchive::decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(sizeof(kMagic));
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw IoError("not a BISIM1 archive (bad magic)");
  const auto version = r.scalar<std::uint16_t>();
  if (version != kFormatVersion) throw IoError("unsupported archive format version " + std::to_string(version));
  const auto count = r.scalar<std::uint32_t>();
  ResultArchive archive;
  for (std::uint32_t i = 0; i < count; ++i) {
    Dataset d;
    d.name = r.string();
    const auto type = r.scalar<std::uint8_t>();
    if (type != 1 && type != 2) throw IoError("dataset '" + d.name + "': unknown element type");
    d.type = static_cast<ElementType>(type);
    const auto ndim = r.scalar<std::uint32_t>();
    d.shape.resize(ndim);
    for (auto& s : d.shape) s = r.scalar<std::uint64_t>();
    d.axes.resize(ndim);
    for (auto& a : d.axes) {
      a.name = r.string();
      a.unit = r.string();
      const auto n = r.scalar<std::uint64_t>();
      a.values.resize(n);
      for (auto& v : a.values) v = r.scalar<double>();
    }
    const auto n_attr = r.scalar<std::uint32_t>();
    for (std::uint32_t k = 0; k < n_attr; ++k) {
      auto key = r.string();
      auto value = r.string();
      d.attributes.emplace_back(std::move(key), std::move(value));
    }
    const auto payload = r.scalar<std::uint64_t>();
    const std::uint64_t expected = d.element_count() * 8;
    if (payload != expected) throw IoError("dataset '" + d.name + "': payload size disagrees with header");
    if (d.type == ElementType::kComplex64) {
      d.complex_values.resize(d.element_count());
      for (auto& c : d.complex_values) {
        const float re = r.scalar<float>();
        const float im = r.scalar<float>();
        c = {re, im};
      }
    } else {
      d.real_values.resize(d.element_count());
      for (auto& v : d.real_values) v = r.scalar<double>();
    }
    archive.add(std::move(d));
  }
  if (!r.done()) throw IoError("archive has trailing bytes");
  return archive;
}

void ResultArchive::write(const std::filesystem::path& path) const {
  const auto bytes = encode();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ResultArchive ResultArchive::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

void export_csv(const ResultArchive& archive, const std::string& name, const std::filesystem::path& path) {
  const Dataset& d = archive.get(name);
  if (d.shape.size() > 2) {
    throw UsageError("export_csv: dataset '" + name + "' has " + std::to_string(d.shape.size()) +
                     " dimensions; slice it to at most 2 first");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");

  const auto value = [&](std::size_t i) {
    return d.type == ElementType::kComplex64
               ? format_number(to_db_magnitude(Complex(d.complex_values[i].real(), d.complex_values[i].imag())))
               : format_number(d.real_values[i]);
  };
  const auto coordinate = [&](std::size_t dim, std::size_t i) {
    const auto& values = d.axes[dim].values;
    return values.empty() ? std::to_string(i) : format_number(values[i]);
  };
  const std::string value_label = d.type == ElementType::kComplex64 ? "power_db" : d.name;

  if (d.shape.empty()) {
    out << value_label << '\n' << value(0) << '\n';
  } else if (d.shape.size() == 1) {
    out << axis_label(d.axes[0], 0) << ',' << value_label << '\n';
    for (std::size_t i = 0; i < d.shape[0]; ++i) out << coordinate(0, i) << ',' << value(i) << '\n';
  } else {
    out << axis_label(d.axes[0], 0) << '\\' << axis_label(d.axes[1], 1);
    for (std::size_t j = 0; j < d.shape[1]; ++j) out << ',' << coordinate(1, j);
    out << '\n';
    for (std::size_t i = 0; i < d.shape[0]; ++i) {
      out << coordinate(0, i);
      for (std::size_t j = 0; j < d.shape[1]; ++j) out << ',' << value(i * d.shape[1] + j);
      out << '\n';
    }
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace bisim
