#pragma once

// Binary named-tensor container shared by checkpoints and adapter files.
//
// Layout (all integers little-endian):
//   "MMWFM"                          5-byte magic
//   u32 format version
//   u64 length, bytes                canonical key=value config text
//   u32 tensor count
//   per tensor:                      manifest entry
//     u32 length, bytes              name
//     u8  dtype (0 f32, 1 f64, 2 i64)
//     u32 rank, u64 dims[rank]
//     u64 payload offset, u64 payload bytes   (offset from payload start)
//   payloads, back to back in manifest order

#include "mmwfm/core.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mmwfm {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[5] = {'M', 'M', 'W', 'F', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { F32 = 0, F64 = 1, I64 = 2 };

inline std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

template <typename T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) return DType::F32;
  else if constexpr (std::is_same_v<T, double>) return DType::F64;
  else return DType::I64;
}

struct TensorRecord {
  DType dtype = DType::F32;
  std::vector<std::uint64_t> shape;
  std::vector<unsigned char> bytes;

  std::uint64_t elements() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

struct Checkpoint {
  std::string config_text;
  std::map<std::string, TensorRecord> tensors;
};

template <typename T>
TensorRecord to_record(const Mat<T>& m) {
  TensorRecord r;
  r.dtype = dtype_of<T>();
  r.shape = {std::uint64_t(m.rows()), std::uint64_t(m.cols())};
  r.bytes.resize(std::size_t(m.size()) * sizeof(T));
  if (!r.bytes.empty()) std::memcpy(r.bytes.data(), m.data(), r.bytes.size());
  return r;
}

inline TensorRecord scalar_record(std::int64_t v) {
  TensorRecord r;
  r.dtype = DType::I64;
  r.shape = {};
  r.bytes.resize(8);
  std::memcpy(r.bytes.data(), &v, 8);
  return r;
}

inline std::int64_t scalar_from_record(const TensorRecord& r, const std::string& name) {
  if (r.dtype != DType::I64 || r.bytes.size() != 8) throw CheckpointError("tensor '" + name + "' is not an i64 scalar");
  std::int64_t v;
  std::memcpy(&v, r.bytes.data(), 8);
  return v;
}

/// Decodes a 2-D floating tensor, checking its shape against the expected one.
template <typename T>
Mat<T> from_record(const TensorRecord& r, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (r.dtype == DType::I64) throw CheckpointError("tensor '" + name + "' has integer dtype");
  if (r.shape.size() != 2 || r.shape[0] != std::uint64_t(rows) || r.shape[1] != std::uint64_t(cols)) {
    std::string got;
    for (std::size_t i = 0; i < r.shape.size(); ++i) got += (i ? "x" : "") + std::to_string(r.shape[i]);
    throw ShapeError("tensor '" + name + "': checkpoint shape " + got + " but model expects " + shape_str(rows, cols));
  }
  Mat<T> m(rows, cols);
  const std::size_t n = std::size_t(rows * cols);
  if (r.dtype == dtype_of<T>()) {
    if (n) std::memcpy(m.data(), r.bytes.data(), n * sizeof(T));
  } else if (r.dtype == DType::F32) {
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, r.bytes.data() + 4 * i, 4);
      m.data()[i] = T(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      std::memcpy(&v, r.bytes.data() + 8 * i, 8);
      m.data()[i] = T(v);
    }
  }
  return m;
}

namespace detail {

template <typename I>
void put_int(std::string& out, I v) {
  char buf[sizeof(I)];
  std::memcpy(buf, &v, sizeof(I));
  out.append(buf, sizeof(I));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename I>
  I get_int() {
    need(sizeof(I));
    I v;
    std::memcpy(&v, data_.data() + pos_, sizeof(I));
    pos_ += sizeof(I);
    return v;
  }

  std::string_view get_bytes(std::uint64_t n) {
    need(n);
    auto s = data_.substr(pos_, std::size_t(n));
    pos_ += std::size_t(n);
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t size() const { return data_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) throw CheckpointError("corrupt checkpoint: truncated at byte " + std::to_string(pos_));
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_int<std::uint32_t>(out, kCheckpointVersion);
  detail::put_int<std::uint64_t>(out, ck.config_text.size());
  out += ck.config_text;
  detail::put_int<std::uint32_t>(out, std::uint32_t(ck.tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& [name, r] : ck.tensors) {
    if (r.bytes.size() != r.elements() * dtype_size(r.dtype))
      throw CheckpointError("tensor '" + name + "': payload size does not match shape");
    detail::put_int<std::uint32_t>(out, std::uint32_t(name.size()));
    out += name;
    detail::put_int<std::uint8_t>(out, std::uint8_t(r.dtype));
    detail::put_int<std::uint32_t>(out, std::uint32_t(r.shape.size()));
    for (auto d : r.shape) detail::put_int<std::uint64_t>(out, d);
    detail::put_int<std::uint64_t>(out, offset);
    detail::put_int<std::uint64_t>(out, r.bytes.size());
    offset += r.bytes.size();
  }
  for (const auto& [name, r] : ck.tensors) out.append(reinterpret_cast<const char*>(r.bytes.data()), r.bytes.size());
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view data) {
  detail::Reader rd(data);
  if (rd.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(rd.get_bytes(sizeof(kCheckpointMagic)).data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw CheckpointError("not a checkpoint: bad magic");
  const auto version = rd.get_int<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  ck.config_text = std::string(rd.get_bytes(rd.get_int<std::uint64_t>()));
  const auto count = rd.get_int<std::uint32_t>();

  struct Entry {
    std::string name;
    TensorRecord rec;
    std::uint64_t offset, nbytes;
  };
  std::vector<Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = std::string(rd.get_bytes(rd.get_int<std::uint32_t>()));
    const auto dt = rd.get_int<std::uint8_t>();
    if (dt > 2) throw CheckpointError("corrupt checkpoint: unknown dtype tag for '" + e.name + "'");
    e.rec.dtype = DType(dt);
    const auto rank = rd.get_int<std::uint32_t>();
    if (rank > 8) throw CheckpointError("corrupt checkpoint: rank " + std::to_string(rank) + " for '" + e.name + "'");
    for (std::uint32_t d = 0; d < rank; ++d) e.rec.shape.push_back(rd.get_int<std::uint64_t>());
    e.offset = rd.get_int<std::uint64_t>();
    e.nbytes = rd.get_int<std::uint64_t>();
    if (e.nbytes != e.rec.elements() * dtype_size(e.rec.dtype))
      throw CheckpointError("corrupt checkpoint: length of '" + e.name + "' does not match its shape");
    entries.push_back(std::move(e));
  }
  const std::size_t base = rd.pos();
  std::uint64_t expected = 0;
  for (auto& e : entries) {
    if (e.offset != expected) throw CheckpointError("corrupt checkpoint: bad offset for '" + e.name + "'");
    expected += e.nbytes;
  }
  if (base + expected != data.size())
    throw CheckpointError("corrupt checkpoint: payload is " + std::to_string(data.size() - base) + " bytes, manifest says " +
                          std::to_string(expected));
  for (auto& e : entries) {
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + base + e.offset);
    e.rec.bytes.assign(p, p + e.nbytes);
    if (!ck.tensors.emplace(e.name, std::move(e.rec)).second)
      throw CheckpointError("corrupt checkpoint: duplicate tensor '" + e.name + "'");
  }
  return ck;
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace mmwfm
