#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "camel/image.hpp"
#include "camel/rng.hpp"
#include "camel/synthdata.hpp"
#include "camel/tensor.hpp"

namespace camel {

// ---- Dynamic illumination ---------------------------------------------------

struct CropBox {
  double top = 0.0, left = 0.0, height = 1.0, width = 1.0;  // fractions of the image
};

/// One concrete draw of the illumination transform.
struct IlluminationParams {
  double brightness = 1.0;
  double contrast = 1.0;
  std::optional<double> rotation_degrees;
  std::optional<CropBox> crop;
};

struct IlluminationConfig {
  double brightness_min = 0.6, brightness_max = 1.4;
  double contrast_min = 0.6, contrast_max = 1.4;
  double rotate_prob = 0.3, max_rotation_degrees = 10.0;
  double crop_prob = 0.3, min_crop_area = 0.8;
};

IlluminationParams sample_illumination(const IlluminationConfig& cfg, Rng& rng);
/// c * (b * img - 0.5) + 0.5, then optional rotation and crop-resize, then clamp.
Image apply_illumination(const Image& img, const IlluminationParams& p);
Image dynamic_illumination(const Image& img, Rng& rng, const IlluminationConfig& cfg = {});

Image rotate_bilinear(const Image& img, double degrees);
Image crop_resize_bilinear(const Image& img, const CropBox& box);

// ---- Gaussian blur ----------------------------------------------------------

struct BlurConfig {
  double sigma = 1.0;
  int radius = 2;

  /// Smallest radius satisfying the truncation bound, ceil(3 sigma).
  static BlurConfig for_sigma(double sigma);
  void validate() const;
};

/// (2r+1) x (2r+1) kernel of exp(-(x^2+y^2) / (2 sigma^2)) normalized to sum 1.
Tensor gaussian_kernel(const BlurConfig& cfg);
/// Per-channel 2-D convolution with replicate padding.
Image gaussian_blur(const Image& img, const BlurConfig& cfg);

// ---- Text augmentation ------------------------------------------------------

struct TextAugmentConfig {
  double replace_prob = 0.1;
  double swap_prob = 0.1;
  double delete_prob = 0.1;
  double insert_prob = 0.1;
};

/// Output caption plus, for each output token, the source index it came from
/// (-1 for inserted tokens).
struct TracedCaption {
  Caption caption;
  std::vector<int> origin;
};

/// Per-token synonym replacement, swap-with-next, deletion, then insertion of
/// a random non-special token, applied in that order. Re-truncated to 56.
TracedCaption text_augment_traced(const Caption& cap, Rng& rng, const Vocabulary& vocab,
                                  const TextAugmentConfig& cfg = {});
Caption text_augment(const Caption& cap, Rng& rng, const Vocabulary& vocab, const TextAugmentConfig& cfg = {});

// ---- Mixup ------------------------------------------------------------------

struct MixupConfig {
  double delta = 1.0;
  void validate() const;
};

/// One Beta(delta, delta) draw via the ratio of two Gamma variates.
double sample_lambda(const MixupConfig& cfg, Rng& rng);

Image mixup_images(const Image& a, const Image& b, double lambda);

/// A caption pair mixed at the token-embedding level. lambda = 1 with an
/// empty `second` is an ordinary caption.
struct TextInput {
  Caption first;
  Caption second;
  double lambda = 1.0;

  static TextInput plain(Caption c) { return {std::move(c), {}, 1.0}; }
  bool operator==(const TextInput&) const = default;
};

/// Per-position convex combination of token-embedding rows from `table`
/// ([vocab x dim]); the shorter caption is padded with [PAD].
Tensor mixup_captions(const Caption& a, const Caption& b, double lambda, const Tensor& table);

/// Position weights for mean-pooling a mixed sequence:
/// w_p = lambda * [a_p != PAD] + (1 - lambda) * [b_p != PAD].
std::vector<double> mixed_pool_weights(const Caption& a, const Caption& b, double lambda);

/// Row of coefficients c over the vocabulary such that c * table equals the
/// weighted mean-pool of the mixed embedding sequence.
std::vector<double> pooling_coefficients(const TextInput& text, std::size_t vocab_size);

// ---- Task assembly ----------------------------------------------------------

enum class TaskTag { T1, T2, T3 };
const char* task_tag_name(TaskTag t);

struct RawPair {
  Image image;
  Caption caption;
  int identity = 0;
};

struct TaskBatch {
  TaskTag tag = TaskTag::T1;
  std::vector<Image> images;
  std::vector<TextInput> texts;
  std::vector<int> identities;
  std::vector<double> lambdas;
  bool stylized = true;

  std::size_t size() const { return images.size(); }
};

struct StylizeConfig {
  IlluminationConfig illumination;
  double blur_sigma_min = 0.5, blur_sigma_max = 2.0;
  TextAugmentConfig text;
  MixupConfig mixup;
};

/// T1 = (I_a, C~), T2 = (I_b, C~), T3 = (I~, C~) for every pair.
std::array<TaskBatch, 3> build_tasks(std::span<const RawPair> batch, Rng& rng, const Vocabulary& vocab,
                                     const StylizeConfig& cfg = {});

/// The unaugmented batch, for runs with stylization disabled.
TaskBatch plain_task(std::span<const RawPair> batch, TaskTag tag = TaskTag::T1);

}  // namespace camel
