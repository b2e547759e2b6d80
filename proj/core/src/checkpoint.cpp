#include "xmusim/checkpoint.hpp"

#include <limits>

#include "xmusim/embedding_store.hpp"
#include "xmusim/error.hpp"

namespace xmusim {

std::vector<std::uint8_t> encode_head(const ProjectionHead& head) {
  head.validate();
  const HeadShape s = head.shape();
  for (auto d : {s.input_dim, s.hidden_dim, s.latent_dim}) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw DataError("checkpoint: dimension too large");
  }
  std::vector<std::uint8_t> out;
  for (char c : {'X', 'M', 'P', 'H'}) out.push_back(static_cast<std::uint8_t>(c));
  bytes::put_u32(out, kCheckpointVersion);
  bytes::put_u32(out, static_cast<std::uint32_t>(s.input_dim));
  bytes::put_u32(out, static_cast<std::uint32_t>(s.hidden_dim));
  bytes::put_u32(out, static_cast<std::uint32_t>(s.latent_dim));
  for (auto p : head.parameters()) {
    for (double v : p) bytes::put_f64(out, v);
  }
  return out;
}

ProjectionHead decode_head(const std::vector<std::uint8_t>& buf) {
  bytes::Reader in(buf, "checkpoint");
  in.expect_magic("XMPH");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  HeadShape s;
  s.input_dim = in.u32();
  s.hidden_dim = in.u32();
  s.latent_dim = in.u32();
  if (s.input_dim == 0 || s.hidden_dim == 0 || s.latent_dim == 0) throw DataError("checkpoint: zero dimension");
  const std::uint64_t n_params = static_cast<std::uint64_t>(s.hidden_dim) * (s.input_dim + 1) +
                                 static_cast<std::uint64_t>(s.latent_dim) * (s.hidden_dim + 1);
  if (n_params > in.remaining() / 8) throw DataError("checkpoint: truncated file");
  ProjectionHead head = ProjectionHead::zeros(s);
  for (auto p : head.parameters()) {
    for (double& v : p) v = in.f64();
  }
  if (in.remaining() != 0) throw DataError("checkpoint: trailing bytes");
  return head;
}

void write_head(const ProjectionHead& head, const std::filesystem::path& path) {
  bytes::write_file(path, encode_head(head));
}

ProjectionHead read_head(const std::filesystem::path& path) {
  try {
    return decode_head(bytes::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace xmusim
