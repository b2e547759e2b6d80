#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xmusim/linalg.hpp"

namespace xmusim {

/// Rows of float32 vectors keyed by string ids, persisted in the XMSM layout:
///
///   "XMSM" | u32 version (=1) | u32 dim | u64 count | count*dim float32 | id table
///
/// The id table holds, per row, a u32 byte length followed by the UTF-8 bytes.
/// Every integer and float is little-endian.
struct EmbeddingStore {
  std::vector<std::string> ids;
  Matrix vectors;  // count x dim

  std::size_t dim() const noexcept { return vectors.cols(); }
  std::size_t count() const noexcept { return vectors.rows(); }
};

inline constexpr std::uint32_t kEmbeddingStoreVersion = 1;

/// Values are narrowed to float32. Throws DataError when ids are not unique, the id count
/// differs from the row count, the dimension is zero, a value is not finite in float32,
/// or the file cannot be written.
void write_embedding_store(const std::vector<std::string>& ids, const Matrix& vectors,
                           const std::filesystem::path& path);
void write_embedding_store(const EmbeddingStore& store, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_embedding_store(const std::vector<std::string>& ids,
                                                 const Matrix& vectors);
EmbeddingStore decode_embedding_store(const std::vector<std::uint8_t>& bytes);

/// Throws DataError on bad magic, version mismatch, truncation or trailing bytes.
EmbeddingStore read_embedding_store(const std::filesystem::path& path);

// Shared by the other binary formats in this library.
namespace bytes {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);

/// Bounds-checked little-endian cursor over a byte buffer.
class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str(std::size_t len);
  void expect_magic(const char (&magic)[5]);

  std::size_t remaining() const noexcept { return buf_.size() - pos_; }
  void require(std::size_t n) const;

 private:
  const std::vector<std::uint8_t>& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& data);

}  // namespace bytes

}  // namespace xmusim
