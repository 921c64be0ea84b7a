#include "physlaw/numkit/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "physlaw/common.hpp"

namespace physlaw::numkit {

namespace {

constexpr char kMagic[4] = {'P', 'H', 'Y', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

std::uint64_t get_u64(std::ifstream& is, const char* what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

std::size_t dtype_size(CheckpointDtype d) {
  switch (d) {
    case CheckpointDtype::f32:
      return 4;
    case CheckpointDtype::f64:
      return 8;
    case CheckpointDtype::u8:
      return 1;
  }
  throw DataError("checkpoint: unknown dtype tag " +
                  std::to_string(int(static_cast<std::uint8_t>(d))));
}

}  // namespace

std::uint64_t CheckpointRecord::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointRecord>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, std::uint32_t(records.size()));
  for (const auto& rec : records) {
    std::uint64_t expect = rec.element_count() * dtype_size(rec.dtype);
    if (rec.payload.size() != expect)
      throw DataError("checkpoint: record '" + rec.name + "' payload is " +
                      std::to_string(rec.payload.size()) + " bytes, dims imply " +
                      std::to_string(expect));
    put_u32(os, std::uint32_t(rec.name.size()));
    os.write(rec.name.data(), std::streamsize(rec.name.size()));
    char dtype = char(static_cast<std::uint8_t>(rec.dtype));
    os.write(&dtype, 1);
    put_u32(os, std::uint32_t(rec.dims.size()));
    for (auto d : rec.dims) put_u64(os, d);
    os.write(reinterpret_cast<const char*>(rec.payload.data()),
             std::streamsize(rec.payload.size()));
  }
  if (!os) throw DataError("checkpoint: write failed: " + path.string());
}

std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4)) throw DataError("checkpoint truncated while reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("checkpoint: magic mismatch in " + path.string());
  std::uint32_t version = get_u32(is, "version");
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  std::uint32_t count = get_u32(is, "record count");
  std::vector<CheckpointRecord> records;
  records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    CheckpointRecord rec;
    std::uint32_t name_len = get_u32(is, "name length");
    rec.name.resize(name_len);
    if (!is.read(rec.name.data(), name_len))
      throw DataError("checkpoint truncated while reading name");
    char dtype;
    if (!is.read(&dtype, 1)) throw DataError("checkpoint truncated while reading dtype");
    rec.dtype = static_cast<CheckpointDtype>(std::uint8_t(dtype));
    std::size_t elem = dtype_size(rec.dtype);  // validates the tag
    std::uint32_t rank = get_u32(is, "rank");
    rec.dims.resize(rank);
    for (auto& d : rec.dims) d = get_u64(is, "dims");
    std::uint64_t bytes = rec.element_count() * elem;
    rec.payload.resize(bytes);
    if (!is.read(reinterpret_cast<char*>(rec.payload.data()), std::streamsize(bytes)))
      throw DataError("checkpoint truncated while reading payload of '" + rec.name + "'");
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {
template <class T, CheckpointDtype D>
CheckpointRecord make_tensor_record(const std::string& name, const TensorT<T>& t) {
  CheckpointRecord rec;
  rec.name = name;
  rec.dtype = D;
  for (auto d : t.shape()) rec.dims.push_back(std::uint64_t(d));
  rec.payload.resize(size_t(t.numel()) * sizeof(T));
  std::memcpy(rec.payload.data(), t.value().data(), rec.payload.size());
  return rec;
}
}  // namespace

CheckpointRecord record_from_tensor(const std::string& name, const Tensor& t) {
  return make_tensor_record<float, CheckpointDtype::f32>(name, t);
}

CheckpointRecord record_from_tensor(const std::string& name, const DTensor& t) {
  return make_tensor_record<double, CheckpointDtype::f64>(name, t);
}

CheckpointRecord record_from_bytes(const std::string& name, const std::string& bytes) {
  CheckpointRecord rec;
  rec.name = name;
  rec.dtype = CheckpointDtype::u8;
  rec.dims = {bytes.size()};
  rec.payload.assign(bytes.begin(), bytes.end());
  return rec;
}

Tensor tensor_from_record(const CheckpointRecord& rec, bool requires_grad) {
  if (rec.dtype != CheckpointDtype::f32)
    throw DataError("checkpoint: record '" + rec.name + "' is not f32");
  Shape shape;
  for (auto d : rec.dims) shape.push_back(std::int64_t(d));
  std::vector<float> data(rec.element_count());
  std::memcpy(data.data(), rec.payload.data(), rec.payload.size());
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

std::string bytes_from_record(const CheckpointRecord& rec) {
  if (rec.dtype != CheckpointDtype::u8)
    throw DataError("checkpoint: record '" + rec.name + "' is not a byte record");
  return std::string(rec.payload.begin(), rec.payload.end());
}

const CheckpointRecord& find_record(const std::vector<CheckpointRecord>& records,
                                    const std::string& name) {
  for (const auto& r : records)
    if (r.name == name) return r;
  std::string names;
  for (const auto& r : records) names += (names.empty() ? "" : ", ") + r.name;
  throw DataError("checkpoint: no record named '" + name + "' (have: " + names + ")");
}

}  // namespace physlaw::numkit
