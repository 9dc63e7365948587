#include "camel/image.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace camel {

Image::Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> px)
    : height_(height), width_(width), channels_(channels), px_(std::move(px)) {
  if (px_.size() != height * width * channels) {
    throw std::invalid_argument("image buffer of " + std::to_string(px_.size()) + " values does not match " +
                                std::to_string(height) + "x" + std::to_string(width) + "x" +
                                std::to_string(channels));
  }
}

void Image::clamp01() {
  for (auto& v : px_) v = std::clamp(v, 0.0, 1.0);
}

Image Image::transposed() const {
  Image out(width_, height_, channels_);
  for (std::size_t y = 0; y < height_; ++y)
    for (std::size_t x = 0; x < width_; ++x)
      for (std::size_t c = 0; c < channels_; ++c) out.at(x, y, c) = at(y, x, c);
  return out;
}

double Image::mean() const {
  if (px_.empty()) return 0.0;
  return std::accumulate(px_.begin(), px_.end(), 0.0) / static_cast<double>(px_.size());
}

}  // namespace camel
