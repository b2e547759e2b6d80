#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>

#include "xmusim/embedding_store.hpp"

namespace xmusim {

/// Precomputed raw text-encoder embeddings keyed by exact text. Stands in for a frozen
/// sentence encoder: every text fed to the text projection head must be present.
class TextEmbeddingTable {
 public:
  TextEmbeddingTable() = default;
  explicit TextEmbeddingTable(EmbeddingStore store);

  static TextEmbeddingTable load(const std::filesystem::path& path);

  std::size_t dim() const noexcept { return store_.dim(); }
  std::size_t size() const noexcept { return store_.count(); }
  bool contains(std::string_view text) const { return index_.contains(std::string(text)); }

  std::optional<std::span<const double>> find(std::string_view text) const;
  /// Throws DataError naming the text when it has no embedding.
  std::span<const double> at(std::string_view text) const;

  const EmbeddingStore& store() const noexcept { return store_; }

 private:
  EmbeddingStore store_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace xmusim
