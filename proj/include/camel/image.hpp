#pragma once

#include <cstddef>
#include <vector>

namespace camel {

/// H x W x C image, row-major with interleaved channels, values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, std::size_t channels = 3, double fill = 0.0)
      : height_(height), width_(width), channels_(channels), px_(height * width * channels, fill) {}
  Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> px);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return px_.size(); }

  double at(std::size_t y, std::size_t x, std::size_t c) const { return px_[(y * width_ + x) * channels_ + c]; }
  double& at(std::size_t y, std::size_t x, std::size_t c) { return px_[(y * width_ + x) * channels_ + c]; }

  const std::vector<double>& pixels() const { return px_; }
  std::vector<double>& pixels() { return px_; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  void clamp01();
  Image transposed() const;
  double mean() const;

  bool operator==(const Image&) const = default;

 private:
  std::size_t height_ = 0, width_ = 0, channels_ = 0;
  std::vector<double> px_;
};

inline constexpr int kUnkId = 0;
inline constexpr int kPadId = 1;
inline constexpr std::size_t kMaxCaptionLength = 56;

struct Caption {
  std::vector<int> tokens;
  bool operator==(const Caption&) const = default;
};

}  // namespace camel
