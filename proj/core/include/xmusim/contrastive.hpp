#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "xmusim/linalg.hpp"
#include "xmusim/text_pipeline.hpp"

namespace xmusim {

struct HeadShape {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t latent_dim = 0;

  bool operator==(const HeadShape&) const = default;
};

/// Two-layer MLP with a ReLU between the layers: y = W2 * relu(W1 * x + b1) + b2.
struct ProjectionHead {
  Matrix w1;  // hidden x input
  Vector b1;  // hidden
  Matrix w2;  // latent x hidden
  Vector b2;  // latent

  static ProjectionHead zeros(const HeadShape& shape);
  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static ProjectionHead xavier(const HeadShape& shape, Rng& rng);

  HeadShape shape() const noexcept { return {w1.cols(), w1.rows(), w2.rows()}; }
  /// Throws DataError when the shapes disagree or an entry is not finite.
  void validate() const;

  std::array<std::span<double>, 4> parameters();
  std::array<std::span<const double>, 4> parameters() const;

  bool operator==(const ProjectionHead&) const = default;
};

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform_unit(Rng& rng);

Vector project(const ProjectionHead& head, std::span<const double> x);

/// Cached activations of a batched forward pass.
struct HeadForward {
  Matrix input;   // n x input
  Matrix hidden;  // n x hidden, pre-activation
  Matrix output;  // n x latent
};

HeadForward forward(const ProjectionHead& head, Matrix input);

struct HeadGradients {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  Matrix input;  // gradient with respect to the batch inputs

  std::array<std::span<const double>, 4> parameters() const;
};

/// Reverse-mode pass through linear-ReLU-linear. The ReLU derivative at 0 is taken as 0.
HeadGradients head_backward(const ProjectionHead& head, const HeadForward& cache, const Matrix& upstream);
HeadGradients head_backward(const ProjectionHead& head, std::span<const double> x, std::span<const double> upstream);

enum class LossDirection { text_to_audio, audio_to_text, symmetric };

const char* to_string(LossDirection d) noexcept;
std::optional<LossDirection> parse_loss_direction(std::string_view name) noexcept;

struct LossConfig {
  double tau = 0.07;
  LossDirection direction = LossDirection::symmetric;
};

/// z(i, j) is the cosine similarity between text i and audio j.
struct SimilarityMatrix {
  Matrix z;
  double tau = 0.07;
};

/// Throws DataError naming the offending row when a vector has zero norm, or when the
/// latent dimensions differ. Entries are clamped to [-1, 1].
SimilarityMatrix cosine_similarity_matrix(const Matrix& text, const Matrix& audio, double tau = 0.07);

/// NT-Xent in minimisation form: -(1/N) sum_i log softmax_i(z / tau)[i], using row-wise
/// softmax for text_to_audio, column-wise for audio_to_text and the mean of both for
/// symmetric. Evaluated with a max-shifted log-sum-exp.
double nt_xent_loss(const Matrix& z, const LossConfig& cfg);
double nt_xent_loss(const SimilarityMatrix& sim, LossDirection direction);

struct ContrastiveGradients {
  double loss = 0.0;
  Matrix text;   // dL / d(projected text)
  Matrix audio;  // dL / d(projected audio)
};

/// Loss and exact gradients through normalisation, dot products and softmax
/// cross-entropy with respect to every un-normalised projected vector.
ContrastiveGradients nt_xent_backward(const Matrix& text, const Matrix& audio, const LossConfig& cfg);

}  // namespace xmusim
