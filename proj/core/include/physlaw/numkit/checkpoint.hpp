#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "physlaw/numkit/tensor.hpp"

namespace physlaw::numkit {

// Tensor archive, magic "PHYW", version 1, little-endian throughout:
//   magic[4] | u32 version | u32 record_count | records...
// record:
//   u32 name_len | name bytes | u8 dtype | u32 rank | u64 dims[rank] | payload
// dtype: 0 = f32, 1 = f64, 2 = u8 (opaque bytes, e.g. embedded JSON config).
// Round trips are bit-exact. Distinct failures raise distinct DataError
// messages: unreadable file, magic mismatch, unsupported version, truncation,
// and payload-size mismatch.

enum class CheckpointDtype : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

struct CheckpointRecord {
  std::string name;
  CheckpointDtype dtype = CheckpointDtype::f32;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;

  std::uint64_t element_count() const;
};

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path);

CheckpointRecord record_from_tensor(const std::string& name, const Tensor& t);
CheckpointRecord record_from_tensor(const std::string& name, const DTensor& t);
CheckpointRecord record_from_bytes(const std::string& name, const std::string& bytes);

Tensor tensor_from_record(const CheckpointRecord& rec, bool requires_grad = false);
std::string bytes_from_record(const CheckpointRecord& rec);

// Convenience over a flat archive: returns the record with `name` or throws
// DataError listing the available names.
const CheckpointRecord& find_record(const std::vector<CheckpointRecord>& records,
                                    const std::string& name);

}  // namespace physlaw::numkit
