#include "xmusim/embedding_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

#include "xmusim/error.hpp"

namespace xmusim {

namespace bytes {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void Reader::require(std::size_t n) const {
  if (remaining() < n) {
    throw DataError(what_ + ": truncated file (need " + std::to_string(n) + " bytes at offset " +
                    std::to_string(pos_) + ", have " + std::to_string(remaining()) + ")");
  }
}

std::uint32_t Reader::u32() {
  require(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  require(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::str(std::size_t len) {
  require(len);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
  pos_ += len;
  return s;
}

void Reader::expect_magic(const char (&magic)[5]) {
  require(4);
  if (std::memcmp(buf_.data() + pos_, magic, 4) != 0) {
    throw DataError(what_ + ": bad magic (expected \"" + std::string(magic, 4) + "\")");
  }
  pos_ += 4;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read failure on " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("write failure on " + path.string());
}

}  // namespace bytes

std::vector<std::uint8_t> encode_embedding_store(const std::vector<std::string>& ids,
                                                 const Matrix& vectors) {
  if (ids.size() != vectors.rows()) {
    throw DataError("embedding store: " + std::to_string(ids.size()) + " ids for " +
                    std::to_string(vectors.rows()) + " vectors");
  }
  if (vectors.cols() == 0) throw DataError("embedding store: dimension must be >= 1");
  if (vectors.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError("embedding store: dimension too large");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw DataError("embedding store: duplicate id '" + id + "'");
    if (id.size() > std::numeric_limits<std::uint32_t>::max()) throw DataError("embedding store: id too long");
  }

  std::vector<std::uint8_t> out;
  out.reserve(20 + vectors.size() * 4);
  for (char c : {'X', 'M', 'S', 'M'}) out.push_back(static_cast<std::uint8_t>(c));
  bytes::put_u32(out, kEmbeddingStoreVersion);
  bytes::put_u32(out, static_cast<std::uint32_t>(vectors.cols()));
  bytes::put_u64(out, vectors.rows());
  for (std::size_t r = 0; r < vectors.rows(); ++r) {
    for (double v : vectors.row(r)) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) {
        throw DataError("embedding store: non-finite value in row " + std::to_string(r) + " ('" +
                        ids[r] + "')");
      }
      bytes::put_f32(out, f);
    }
  }
  for (const auto& id : ids) {
    bytes::put_u32(out, static_cast<std::uint32_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());
  }
  return out;
}

void write_embedding_store(const std::vector<std::string>& ids, const Matrix& vectors,
                           const std::filesystem::path& path) {
  bytes::write_file(path, encode_embedding_store(ids, vectors));
}

void write_embedding_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  write_embedding_store(store.ids, store.vectors, path);
}

EmbeddingStore decode_embedding_store(const std::vector<std::uint8_t>& buf) {
  bytes::Reader in(buf, "embedding store");
  in.expect_magic("XMSM");
  const std::uint32_t version = in.u32();
  if (version != kEmbeddingStoreVersion) {
    throw DataError("embedding store: unsupported version " + std::to_string(version));
  }
  const std::uint32_t dim = in.u32();
  const std::uint64_t count = in.u64();
  if (dim == 0) throw DataError("embedding store: dimension is zero");
  // Guard the allocation against corrupted headers before trusting count.
  if (count > in.remaining() / 4 / dim) throw DataError("embedding store: truncated file (row data)");

  EmbeddingStore store;
  store.vectors = Matrix(count, dim);
  for (double& v : store.vectors.values()) v = static_cast<double>(in.f32());
  store.ids.reserve(count);
  std::unordered_set<std::string> seen;
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::uint32_t len = in.u32();
    std::string id = in.str(len);
    if (!seen.insert(id).second) throw DataError("embedding store: duplicate id '" + id + "'");
    store.ids.push_back(std::move(id));
  }
  if (in.remaining() != 0) throw DataError("embedding store: trailing bytes after id table");
  return store;
}

EmbeddingStore read_embedding_store(const std::filesystem::path& path) {
  try {
    return decode_embedding_store(bytes::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace xmusim
