#include "mygo/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mygo {

namespace {

template <typename T>
T to_le(T v) {
  static_assert(std::is_integral_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    T out = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
      out |= ((v >> (8 * i)) & 0xFF) << (8 * (sizeof(T) - 1 - i));
    return out;
  }
  return v;
}

}  // namespace

void ByteWriter::u8(uint8_t v) { buf_.push_back(v); }

void ByteWriter::u32(uint32_t v) {
  v = to_le(v);
  raw(&v, sizeof(v));
}

void ByteWriter::u64(uint64_t v) {
  v = to_le(v);
  raw(&v, sizeof(v));
}

void ByteWriter::i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
void ByteWriter::i64(int64_t v) { u64(static_cast<uint64_t>(v)); }

void ByteWriter::f64(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  u64(bits);
}

void ByteWriter::str(const std::string& s) {
  u32(static_cast<uint32_t>(s.size()));
  raw(s.data(), s.size());
}

void ByteWriter::raw(const void* p, size_t n) {
  const auto* b = static_cast<const uint8_t*>(p);
  buf_.insert(buf_.end(), b, b + n);
}

void ByteReader::need(size_t n) {
  if (pos_ + n > buf_.size())
    throw std::runtime_error("container truncated: needed " +
                             std::to_string(n) + " bytes at offset " +
                             std::to_string(pos_));
}

uint8_t ByteReader::u8() {
  need(1);
  return buf_[pos_++];
}

uint32_t ByteReader::u32() {
  need(4);
  uint32_t v;
  std::memcpy(&v, buf_.data() + pos_, 4);
  pos_ += 4;
  return to_le(v);
}

uint64_t ByteReader::u64() {
  need(8);
  uint64_t v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return to_le(v);
}

int32_t ByteReader::i32() { return static_cast<int32_t>(u32()); }
int64_t ByteReader::i64() { return static_cast<int64_t>(u64()); }

double ByteReader::f64() {
  const uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::string ByteReader::str() {
  const uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::raw(void* p, size_t n) {
  need(n);
  std::memcpy(p, buf_.data() + pos_, n);
  pos_ += n;
}

void write_container_header(ByteWriter& w, ContainerKind kind) {
  w.raw(kContainerMagic, sizeof(kContainerMagic));
  w.u32(kContainerVersion);
  w.u8(static_cast<uint8_t>(kind));
}

ContainerKind read_container_header(ByteReader& r) {
  char magic[5];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kContainerMagic, sizeof(magic)) != 0)
    throw std::runtime_error("bad container magic (expected MYGO1)");
  const uint32_t version = r.u32();
  if (version != kContainerVersion)
    throw std::runtime_error("unknown container version " +
                             std::to_string(version));
  const uint8_t kind = r.u8();
  if (kind > static_cast<uint8_t>(ContainerKind::memory))
    throw std::runtime_error("unknown container kind " + std::to_string(kind));
  return static_cast<ContainerKind>(kind);
}

void write_named_tensors(ByteWriter& w, const std::vector<NamedTensor>& ts) {
  w.u32(static_cast<uint32_t>(ts.size()));
  for (const NamedTensor& nt : ts) {
    w.str(nt.name);
    w.u32(static_cast<uint32_t>(nt.tensor.rank()));
    for (size_t e : nt.tensor.shape()) w.u64(e);
    for (double v : nt.tensor.data()) w.f64(v);
  }
}

std::vector<NamedTensor> read_named_tensors(ByteReader& r) {
  const uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = r.str();
    const uint32_t rank = r.u32();
    std::vector<size_t> shape(rank);
    size_t total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<size_t>(r.u64());
      total *= shape[d];
    }
    std::vector<double> data(total);
    for (size_t j = 0; j < total; ++j) data[j] = r.f64();
    nt.tensor = Tensor::from(std::move(shape), std::move(data));
    out.push_back(std::move(nt));
  }
  return out;
}

void write_file(const std::filesystem::path& path, const ByteWriter& w) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(w.bytes().data()),
           static_cast<std::streamsize>(w.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
  const std::streamsize size = is.tellg();
  is.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  if (size > 0)
    is.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!is) throw std::runtime_error("read failed: " + path.string());
  return bytes;
}

}  // namespace mygo
