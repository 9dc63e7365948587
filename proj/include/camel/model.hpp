#pragma once

#include <span>
#include <string>
#include <vector>

#include "camel/augment.hpp"
#include "camel/memory.hpp"
#include "camel/param_vector.hpp"
#include "camel/rng.hpp"
#include "camel/tape.hpp"

namespace camel {

struct EncoderConfig {
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::size_t patch = 8;
  std::size_t embed_dim = 32;  // 256 at full scale
  std::size_t hidden_dim = 64;
  std::size_t vocab_size = 0;  // 0 means "use the standard vocabulary"
  double temperature = 0.07;
  double itm_weight = 1.0;
  std::size_t negatives_per_pair = 2;

  std::size_t patches_per_image() const { return (image_size / patch) * (image_size / patch); }
  std::size_t patch_dim() const { return patch * patch * channels; }
  std::size_t resolved_vocab_size() const;
  void validate() const;
  /// Canonical text form; hashed into checkpoints to detect shape mismatches.
  std::string shape_signature() const;
};

/// Fresh parameters for the image, text and cross encoders.
ParamVector init_params(const EncoderConfig& cfg, Rng& rng);

/// [B x P*P*C]-per-patch matrix [B*patches x patch_dim], centred at 0.5.
Tensor image_patches(std::span<const Image> images, const EncoderConfig& cfg);

/// Patch MLP (tanh, two layers) -> mean-pool over patches -> linear -> L2 normalize.
Var encode_image(Tape& tape, const ParamMap& params, const EncoderConfig& cfg, std::span<const Image> images);

/// Mean-pooled token embeddings over non-[PAD] positions -> 2-layer MLP -> L2 normalize.
Var encode_text(Tape& tape, const ParamMap& params, const EncoderConfig& cfg, std::span<const TextInput> texts);

/// Symmetric InfoNCE on cosine similarities; same-identity pairs are
/// positives with averaged targets.
Var itc_loss(Var image_emb, Var text_emb, double temperature, std::span<const int> identities);

/// mean(softplus(z) - y * z).
Var bce_with_logits(Var logits, std::span<const double> labels);

/// Matching-head logits for row-aligned (image, text) embedding pairs.
Var itm_logits(const ParamMap& params, Var image_rows, Var text_rows);

/// Binary matching loss: label 1 for each true pair, 0 for mined negatives in
/// both directions. Memory supplies hard negatives first; in-batch negatives
/// fill whatever the memory cannot.
Var itm_loss(const ParamMap& params, Var image_emb, Var text_emb, std::span<const int> identities,
             const MemoryUnit* memory, std::size_t negatives_per_pair);

struct TaskLoss {
  Var loss;
  double itc = 0.0;
  double itm = 0.0;
};

/// itc + itm_weight * itm on the task's pairs. `negatives` supplies memory
/// hard negatives; afterwards the batch's embeddings are pushed into `push_to`.
TaskLoss task_loss(Tape& tape, const ParamMap& params, const EncoderConfig& cfg, const TaskBatch& task,
                   const MemoryUnit* negatives, MemoryUnit* push_to = nullptr);

/// Unit-norm embeddings without recording gradients.
Tensor embed_images(const ParamVector& params, const EncoderConfig& cfg, std::span<const Image> images);
Tensor embed_texts(const ParamVector& params, const EncoderConfig& cfg, std::span<const TextInput> texts);

}  // namespace camel
