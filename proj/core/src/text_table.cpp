#include "xmusim/text_table.hpp"

#include "xmusim/error.hpp"

namespace xmusim {

TextEmbeddingTable::TextEmbeddingTable(EmbeddingStore store) : store_(std::move(store)) {
  index_.reserve(store_.ids.size());
  for (std::size_t i = 0; i < store_.ids.size(); ++i) index_.emplace(store_.ids[i], i);
}

TextEmbeddingTable TextEmbeddingTable::load(const std::filesystem::path& path) {
  return TextEmbeddingTable(read_embedding_store(path));
}

std::optional<std::span<const double>> TextEmbeddingTable::find(std::string_view text) const {
  auto it = index_.find(std::string(text));
  if (it == index_.end()) return std::nullopt;
  return store_.vectors.row(it->second);
}

std::span<const double> TextEmbeddingTable::at(std::string_view text) const {
  auto row = find(text);
  if (!row) throw DataError("no raw text embedding for \"" + std::string(text) + "\"");
  return *row;
}

}  // namespace xmusim
