#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "strnet/common.hpp"

namespace strnet {

// Versioned binary container of named double arrays with an FNV-1a content
// checksum. Layout (little-endian):
//   "STRN" | u32 version | u64 entry count
//   per entry: u32 name_len | name bytes | u32 ndim | u64 dims... | f64 data...
//   u64 checksum over everything before it
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

class ArrayContainer {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void add(std::string name, Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size())
      throw ShapeError("container entry '" + name + "': shape " + shape_str(shape) +
                       " vs " + std::to_string(data.size()) + " values");
    if (index_.count(name)) throw ValueError("container entry '" + name + "' already present");
    index_[name] = entries_.size();
    entries_.push_back({std::move(name), std::move(shape), std::move(data)});
  }

  void add_scalar(std::string name, double v) { add(std::move(name), {1}, {v}); }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  const NamedArray& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw IoError("container is missing entry '" + name + "'");
    return entries_[it->second];
  }

  double get_scalar(const std::string& name) const {
    const NamedArray& a = get(name);
    if (a.data.size() != 1) throw IoError("container entry '" + name + "' is not a scalar");
    return a.data[0];
  }

  const std::vector<NamedArray>& entries() const { return entries_; }

  void save(const std::string& path) const {
    std::vector<unsigned char> buf;
    append_bytes(buf, "STRN", 4);
    append_u32(buf, kVersion);
    append_u64(buf, entries_.size());
    for (const auto& e : entries_) {
      append_u32(buf, std::uint32_t(e.name.size()));
      append_bytes(buf, e.name.data(), e.name.size());
      append_u32(buf, std::uint32_t(e.shape.size()));
      for (std::size_t d : e.shape) append_u64(buf, d);
      for (double v : e.data) append_f64(buf, v);
    }
    append_u64(buf, fnv1a64(buf.data(), buf.size()));
    atomic_write(path, buf);
  }

  static ArrayContainer load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 24) throw IoError("'" + path + "' is truncated");

    std::size_t payload = buf.size() - 8;
    std::uint64_t expect = read_u64(buf, payload);
    std::uint64_t actual = fnv1a64(buf.data(), payload);
    if (expect != actual) throw IoError("'" + path + "' failed its content checksum");

    std::size_t off = 0;
    if (std::memcmp(buf.data(), "STRN", 4) != 0)
      throw IoError("'" + path + "' is not a strnet container");
    off += 4;
    std::uint32_t version = read_u32(buf, off);
    off += 4;
    if (version != kVersion)
      throw IoError("'" + path + "' has unsupported container version " +
                    std::to_string(version));
    std::uint64_t count = read_u64(buf, off);
    off += 8;

    ArrayContainer c;
    for (std::uint64_t i = 0; i < count; ++i) {
      if (off + 4 > payload) throw IoError("'" + path + "' is truncated");
      std::uint32_t name_len = read_u32(buf, off);
      off += 4;
      if (off + name_len > payload) throw IoError("'" + path + "' is truncated");
      std::string name(reinterpret_cast<const char*>(buf.data() + off), name_len);
      off += name_len;
      std::uint32_t ndim = read_u32(buf, off);
      off += 4;
      Shape shape(ndim);
      for (auto& d : shape) {
        d = std::size_t(read_u64(buf, off));
        off += 8;
      }
      std::size_t numel = shape_numel(shape);
      if (off + numel * 8 > payload) throw IoError("'" + path + "' is truncated");
      std::vector<double> data(numel);
      for (auto& v : data) {
        std::uint64_t bits = read_u64(buf, off);
        off += 8;
        std::memcpy(&v, &bits, 8);
      }
      c.add(std::move(name), std::move(shape), std::move(data));
    }
    return c;
  }

  // write-temp-then-rename so partial writes never clobber an existing file
  static void atomic_write(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open '" + tmp + "' for writing");
      out.write(reinterpret_cast<const char*>(bytes.data()),
                std::streamsize(bytes.size()));
      if (!out) throw IoError("short write to '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename '" + tmp + "' -> '" + path + "': " + ec.message());
  }

  static void atomic_write_text(const std::string& path, const std::string& text) {
    atomic_write(path, std::vector<unsigned char>(text.begin(), text.end()));
  }

 private:
  static void append_bytes(std::vector<unsigned char>& buf, const char* p, std::size_t n) {
    buf.insert(buf.end(), p, p + n);
  }
  static void append_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back((unsigned char)((v >> (8 * i)) & 0xff));
  }
  static void append_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back((unsigned char)((v >> (8 * i)) & 0xff));
  }
  static void append_f64(std::vector<unsigned char>& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    append_u64(buf, bits);
  }
  static std::uint32_t read_u32(const std::vector<unsigned char>& buf, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[off + i]) << (8 * i);
    return v;
  }
  static std::uint64_t read_u64(const std::vector<unsigned char>& buf, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[off + i]) << (8 * i);
    return v;
  }

  std::vector<NamedArray> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace strnet
