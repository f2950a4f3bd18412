#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adgan/core/tensor.hpp"
#include "adgan/errors.hpp"

namespace adgan {

enum class DType : std::uint8_t { f32 = 0, u64 = 1 };

/// A tensor as stored on disk. Exactly one of the value vectors is used,
/// selected by dtype. u64 carries counters (optimizer step counts).
struct StoredTensor {
  DType dtype = DType::f32;
  Shape shape;
  std::vector<float> f32;
  std::vector<std::uint64_t> u64;

  static StoredTensor from(const Tensor<float>& t) { return {DType::f32, t.shape(), {t.data().begin(), t.data().end()}, {}}; }
  static StoredTensor counter(std::uint64_t v) { return {DType::u64, {}, {}, {v}}; }

  Tensor<float> to_tensor(bool requires_grad = false) const {
    if (dtype != DType::f32) throw ContractError("stored tensor is not f32");
    return Tensor<float>(shape, f32, requires_grad);
  }

  bool operator==(const StoredTensor&) const = default;
};

using TensorTable = std::map<std::string, StoredTensor>;

/// Little-endian binary checkpoint:
///   "ADGN" | u32 version | u32 len + config text | u32 len + schema text |
///   u32 count + tensors | u32 count + optimizer tensors | u32 len + rng state
/// Tensor: u16 name len, name, u8 dtype, u8 rank, u32 dims..., raw values.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr char kMagic[4] = {'A', 'D', 'G', 'N'};

  std::string config;
  std::string schema;
  TensorTable tensors;
  TensorTable optimizer;
  std::string rng_state;

  std::vector<std::uint8_t> encode() const;
  static Checkpoint decode(std::span<const std::uint8_t> bytes);

  void save(const std::string& path) const {
    const auto bytes = encode();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
  }

  bool operator==(const Checkpoint&) const = default;
};

namespace detail {

class ByteWriter {
 public:
  template <class U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void put_f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put(bits);
  }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void put_blob(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  float get_f32(const char* what) {
    const auto bits = get<std::uint32_t>(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string get_blob(const char* what) { return get_bytes(get<std::uint32_t>(what), what); }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated while reading ") + what, pos_);
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline void write_table(ByteWriter& w, const TensorTable& table) {
  w.put(static_cast<std::uint32_t>(table.size()));
  for (const auto& [name, t] : table) {
    if (name.size() > 0xFFFF) throw ContractError("tensor name too long: " + name);
    if (t.shape.size() > 0xFF) throw ContractError("tensor rank too large: " + name);
    w.put(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name);
    w.put(static_cast<std::uint8_t>(t.dtype));
    w.put(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) w.put(static_cast<std::uint32_t>(d));
    if (t.dtype == DType::f32) {
      if (t.f32.size() != shape_numel(t.shape)) throw ContractError("tensor " + name + " has wrong length");
      for (float v : t.f32) w.put_f32(v);
    } else {
      if (t.u64.size() != shape_numel(t.shape)) throw ContractError("tensor " + name + " has wrong length");
      for (auto v : t.u64) w.put(v);
    }
  }
}

inline TensorTable read_table(ByteReader& r) {
  TensorTable table;
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::size_t at = r.offset();
    const auto name_len = r.get<std::uint16_t>("tensor name length");
    std::string name = r.get_bytes(name_len, "tensor name");
    StoredTensor t;
    const std::size_t dtype_at = r.offset();
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype > 1) throw FormatError("unknown dtype tag " + std::to_string(dtype), dtype_at);
    t.dtype = static_cast<DType>(dtype);
    const auto rank = r.get<std::uint8_t>("rank");
    for (std::uint8_t i = 0; i < rank; ++i) t.shape.push_back(r.get<std::uint32_t>("dimension"));
    const std::size_t n = shape_numel(t.shape);
    if (t.dtype == DType::f32) {
      t.f32.resize(n);
      for (auto& v : t.f32) v = r.get_f32("tensor values");
    } else {
      t.u64.resize(n);
      for (auto& v : t.u64) v = r.get<std::uint64_t>("tensor values");
    }
    if (!table.emplace(std::move(name), std::move(t)).second) {
      throw FormatError("duplicate tensor name", at);
    }
  }
  return table;
}

}  // namespace detail

inline std::vector<std::uint8_t> Checkpoint::encode() const {
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kMagic, 4));
  w.put(kVersion);
  w.put_blob(config);
  w.put_blob(schema);
  detail::write_table(w, tensors);
  detail::write_table(w, optimizer);
  w.put_blob(rng_state);
  return w.take();
}

inline Checkpoint Checkpoint::decode(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (r.get_bytes(4, "magic") != std::string_view(kMagic, 4)) throw FormatError("bad magic", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    throw FormatError("unsupported format version " + std::to_string(version), 4);
  }
  Checkpoint ck;
  ck.config = r.get_blob("config");
  ck.schema = r.get_blob("schema");
  ck.tensors = detail::read_table(r);
  ck.optimizer = detail::read_table(r);
  ck.rng_state = r.get_blob("rng state");
  if (!r.done()) throw FormatError("trailing bytes after checkpoint", r.offset());
  return ck;
}

}  // namespace adgan
