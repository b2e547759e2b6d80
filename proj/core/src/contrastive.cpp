#include "xmusim/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmusim/error.hpp"

namespace xmusim {

double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

ProjectionHead ProjectionHead::zeros(const HeadShape& s) {
  if (s.input_dim == 0 || s.hidden_dim == 0 || s.latent_dim == 0) {
    throw DataError("projection head dimensions must be positive");
  }
  return {Matrix(s.hidden_dim, s.input_dim), Vector(s.hidden_dim, 0.0), Matrix(s.latent_dim, s.hidden_dim),
          Vector(s.latent_dim, 0.0)};
}

ProjectionHead ProjectionHead::xavier(const HeadShape& s, Rng& rng) {
  ProjectionHead h = zeros(s);
  auto fill = [&](Matrix& w) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.values()) v = (2.0 * uniform_unit(rng) - 1.0) * a;
  };
  fill(h.w1);
  fill(h.w2);
  return h;
}

void ProjectionHead::validate() const {
  if (w1.rows() == 0 || w1.cols() == 0 || w2.rows() == 0) throw DataError("projection head: empty dimension");
  if (b1.size() != w1.rows() || w2.cols() != w1.rows() || b2.size() != w2.rows()) {
    throw DataError("projection head: inconsistent shapes");
  }
  for (auto p : parameters()) {
    if (!all_finite(p)) throw DataError("projection head: non-finite parameter");
  }
}

std::array<std::span<double>, 4> ProjectionHead::parameters() {
  return {w1.values(), std::span<double>(b1), w2.values(), std::span<double>(b2)};
}

std::array<std::span<const double>, 4> ProjectionHead::parameters() const {
  return {w1.values(), std::span<const double>(b1), w2.values(), std::span<const double>(b2)};
}

std::array<std::span<const double>, 4> HeadGradients::parameters() const {
  return {w1.values(), std::span<const double>(b1), w2.values(), std::span<const double>(b2)};
}

Vector project(const ProjectionHead& head, std::span<const double> x) {
  if (x.size() != head.w1.cols()) {
    throw DataError("project: input dimension " + std::to_string(x.size()) + " != head input dimension " +
                    std::to_string(head.w1.cols()));
  }
  Vector hidden(head.w1.rows());
  for (std::size_t k = 0; k < hidden.size(); ++k) hidden[k] = std::max(0.0, head.b1[k] + dot(head.w1.row(k), x));
  Vector out(head.w2.rows());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = head.b2[o] + dot(head.w2.row(o), hidden);
  return out;
}

HeadForward forward(const ProjectionHead& head, Matrix input) {
  if (input.cols() != head.w1.cols()) {
    throw DataError("forward: input dimension " + std::to_string(input.cols()) + " != head input dimension " +
                    std::to_string(head.w1.cols()));
  }
  HeadForward f;
  f.hidden = affine_rows(input, head.w1, head.b1);
  Matrix activated = f.hidden;
  for (double& v : activated.values()) v = std::max(0.0, v);
  f.output = affine_rows(activated, head.w2, head.b2);
  f.input = std::move(input);
  return f;
}

HeadGradients head_backward(const ProjectionHead& head, const HeadForward& cache, const Matrix& upstream) {
  const std::size_t n = cache.input.rows();
  const std::size_t in_dim = head.w1.cols();
  const std::size_t hid = head.w1.rows();
  const std::size_t lat = head.w2.rows();
  if (upstream.rows() != n || upstream.cols() != lat || cache.hidden.rows() != n || cache.hidden.cols() != hid) {
    throw DataError("head_backward: shape mismatch");
  }

  HeadGradients g{Matrix(hid, in_dim), Vector(hid, 0.0), Matrix(lat, hid), Vector(lat, 0.0), Matrix(n, in_dim)};
  Vector relu(hid);
  Vector d_hidden(hid);
  for (std::size_t s = 0; s < n; ++s) {
    auto h = cache.hidden.row(s);
    auto up = upstream.row(s);
    for (std::size_t k = 0; k < hid; ++k) relu[k] = std::max(0.0, h[k]);

    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    for (std::size_t o = 0; o < lat; ++o) {
      const double go = up[o];
      if (go == 0.0) continue;
      g.b2[o] += go;
      auto gw2 = g.w2.row(o);
      auto w2 = head.w2.row(o);
      for (std::size_t k = 0; k < hid; ++k) {
        gw2[k] += go * relu[k];
        d_hidden[k] += go * w2[k];
      }
    }
    auto x = cache.input.row(s);
    auto dx = g.input.row(s);
    for (std::size_t k = 0; k < hid; ++k) {
      if (!(h[k] > 0.0)) continue;
      const double gk = d_hidden[k];
      if (gk == 0.0) continue;
      g.b1[k] += gk;
      auto gw1 = g.w1.row(k);
      auto w1 = head.w1.row(k);
      for (std::size_t i = 0; i < in_dim; ++i) {
        gw1[i] += gk * x[i];
        dx[i] += gk * w1[i];
      }
    }
  }
  return g;
}

HeadGradients head_backward(const ProjectionHead& head, std::span<const double> x, std::span<const double> upstream) {
  Matrix in;
  in.append_row(x);
  Matrix up;
  up.append_row(upstream);
  return head_backward(head, forward(head, std::move(in)), up);
}

const char* to_string(LossDirection d) noexcept {
  switch (d) {
    case LossDirection::text_to_audio:
      return "text_to_audio";
    case LossDirection::audio_to_text:
      return "audio_to_text";
    case LossDirection::symmetric:
      return "symmetric";
  }
  return "?";
}

std::optional<LossDirection> parse_loss_direction(std::string_view name) noexcept {
  if (name == "text_to_audio") return LossDirection::text_to_audio;
  if (name == "audio_to_text") return LossDirection::audio_to_text;
  if (name == "symmetric") return LossDirection::symmetric;
  return std::nullopt;
}

namespace {

Vector row_norms(const Matrix& m, const char* what) {
  Vector norms(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    norms[i] = l2_norm(m.row(i));
    if (!(norms[i] > 0.0)) throw DataError(std::string(what) + " vector " + std::to_string(i) + " has zero norm");
  }
  return norms;
}

Matrix normalized(const Matrix& m, const Vector& norms) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (double& v : out.row(i)) v /= norms[i];
  }
  return out;
}

Matrix raw_cosines(const Matrix& tn, const Matrix& an) {
  Matrix z(tn.rows(), an.rows());
  for (std::size_t i = 0; i < tn.rows(); ++i) {
    for (std::size_t j = 0; j < an.rows(); ++j) z(i, j) = dot(tn.row(i), an.row(j));
  }
  return z;
}

void check_loss_inputs(const Matrix& z, double tau) {
  if (z.rows() != z.cols()) throw DataError("nt_xent: similarity matrix is not square");
  if (z.rows() == 0) throw DataError("nt_xent: empty batch");
  if (!(tau > 0.0)) throw DataError("nt_xent: temperature must be positive");
}

// Mean over rows of (logsumexp_j s(i, j) - s(i, i)); optionally stores softmax
// probabilities. `transpose` walks columns instead of rows.
double softmax_xent(const Matrix& z, double tau, bool transpose, Matrix* probs) {
  const std::size_t n = z.rows();
  auto at = [&](std::size_t i, std::size_t j) { return (transpose ? z(j, i) : z(i, j)) / tau; };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(at(i, j) - mx);
    const double lse = mx + std::log(sum);
    total += lse - at(i, i);
    if (probs) {
      for (std::size_t j = 0; j < n; ++j) {
        const double p = std::exp(at(i, j) - lse);
        if (transpose) {
          (*probs)(j, i) = p;
        } else {
          (*probs)(i, j) = p;
        }
      }
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace

SimilarityMatrix cosine_similarity_matrix(const Matrix& text, const Matrix& audio, double tau) {
  if (text.cols() != audio.cols()) throw DataError("cosine_similarity_matrix: latent dimensions differ");
  const Matrix tn = normalized(text, row_norms(text, "text"));
  const Matrix an = normalized(audio, row_norms(audio, "audio"));
  Matrix z = raw_cosines(tn, an);
  for (double& v : z.values()) v = std::clamp(v, -1.0, 1.0);
  return {std::move(z), tau};
}

double nt_xent_loss(const Matrix& z, const LossConfig& cfg) {
  check_loss_inputs(z, cfg.tau);
  switch (cfg.direction) {
    case LossDirection::text_to_audio:
      return softmax_xent(z, cfg.tau, false, nullptr);
    case LossDirection::audio_to_text:
      return softmax_xent(z, cfg.tau, true, nullptr);
    case LossDirection::symmetric:
      return 0.5 * (softmax_xent(z, cfg.tau, false, nullptr) + softmax_xent(z, cfg.tau, true, nullptr));
  }
  return 0.0;
}

double nt_xent_loss(const SimilarityMatrix& sim, LossDirection direction) {
  return nt_xent_loss(sim.z, LossConfig{sim.tau, direction});
}

ContrastiveGradients nt_xent_backward(const Matrix& text, const Matrix& audio, const LossConfig& cfg) {
  if (text.rows() != audio.rows()) throw DataError("nt_xent_backward: batch sizes differ");
  if (text.cols() != audio.cols()) throw DataError("nt_xent_backward: latent dimensions differ");
  const std::size_t n = text.rows();
  const std::size_t d = text.cols();
  const Vector tnorm = row_norms(text, "text");
  const Vector anorm = row_norms(audio, "audio");
  const Matrix tn = normalized(text, tnorm);
  const Matrix an = normalized(audio, anorm);
  const Matrix z = raw_cosines(tn, an);
  check_loss_inputs(z, cfg.tau);

  // dL/dz(i, j) = w * (P(i, j) - [i == j]) / (N * tau), summed over the active directions.
  Matrix dz(n, n);
  double loss = 0.0;
  auto accumulate = [&](bool transpose, double weight) {
    Matrix p(n, n);
    loss += weight * softmax_xent(z, cfg.tau, transpose, &p);
    const double scale = weight / (static_cast<double>(n) * cfg.tau);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) dz(i, j) += scale * (p(i, j) - (i == j ? 1.0 : 0.0));
    }
  };
  switch (cfg.direction) {
    case LossDirection::text_to_audio:
      accumulate(false, 1.0);
      break;
    case LossDirection::audio_to_text:
      accumulate(true, 1.0);
      break;
    case LossDirection::symmetric:
      accumulate(false, 0.5);
      accumulate(true, 0.5);
      break;
  }

  ContrastiveGradients out{loss, Matrix(n, d), Matrix(n, d)};
  // Gradient w.r.t. the unit vectors, then through x / |x|: (I - u u^T) g / |x|.
  Vector g(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double w = dz(i, j);
      auto a = an.row(j);
      for (std::size_t k = 0; k < d; ++k) g[k] += w * a[k];
    }
    auto u = tn.row(i);
    const double radial = dot(g, u);
    auto dst = out.text.row(i);
    for (std::size_t k = 0; k < d; ++k) dst[k] = (g[k] - radial * u[k]) / tnorm[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = dz(i, j);
      auto t = tn.row(i);
      for (std::size_t k = 0; k < d; ++k) g[k] += w * t[k];
    }
    auto u = an.row(j);
    const double radial = dot(g, u);
    auto dst = out.audio.row(j);
    for (std::size_t k = 0; k < d; ++k) dst[k] = (g[k] - radial * u[k]) / anorm[j];
  }
  return out;
}

}  // namespace xmusim
