#pragma once
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mygo/tensor.hpp"

namespace mygo {

// "MYGO1" container: magic, u32 version, u8 kind, a kind-specific header
// blob, then named tensors as {u32 name length, name bytes, u32 rank,
// u64 extents, little-endian float64 data}. All integers little-endian.
inline constexpr char kContainerMagic[5] = {'M', 'Y', 'G', 'O', '1'};
inline constexpr uint32_t kContainerVersion = 1;

enum class ContainerKind : uint8_t { model = 0, memory = 1 };

// Byte sink/source with explicit little-endian encoding, so files are
// identical across hosts.
class ByteWriter {
 public:
  void u8(uint8_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void i32(int32_t v);
  void i64(int64_t v);
  void f64(double v);
  void str(const std::string& s);  // u32 length + bytes
  void raw(const void* p, size_t n);
  const std::vector<uint8_t>& bytes() const { return buf_; }
  size_t size() const { return buf_.size(); }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<uint8_t> bytes) : buf_(std::move(bytes)) {}
  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  int32_t i32();
  int64_t i64();
  double f64();
  std::string str();
  void raw(void* p, size_t n);
  bool at_end() const { return pos_ == buf_.size(); }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(size_t n);
  std::vector<uint8_t> buf_;
  size_t pos_ = 0;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Container-level helpers shared by model and memory files.
void write_container_header(ByteWriter& w, ContainerKind kind);
// Throws std::runtime_error on bad magic or unknown version.
ContainerKind read_container_header(ByteReader& r);
void write_named_tensors(ByteWriter& w, const std::vector<NamedTensor>& ts);
std::vector<NamedTensor> read_named_tensors(ByteReader& r);

void write_file(const std::filesystem::path& path, const ByteWriter& w);
std::vector<uint8_t> read_file(const std::filesystem::path& path);

}  // namespace mygo
