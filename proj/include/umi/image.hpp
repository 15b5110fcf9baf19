#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "umi/error.hpp"

namespace umi {

/** 8-bit interleaved image, row-major. */
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> data;

  static ImageBuffer create(std::size_t w, std::size_t h, std::size_t c) {
    ImageBuffer img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.data.assign(w * h * c, 0);
    return img;
  }

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return data[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return data[(y * width + x) * channels + c];
  }
};

struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

namespace detail {

inline bool rect_in_bounds(const PixelRect& r, const ImageBuffer& img) {
  return r.x >= 0 && r.y >= 0 && r.w > 0 && r.h > 0 &&
         static_cast<std::size_t>(r.x + r.w) <= img.width &&
         static_cast<std::size_t>(r.y + r.h) <= img.height;
}

inline bool rects_overlap(const PixelRect& a, const PixelRect& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

}  // namespace detail

/** Swap the two mirror crops, horizontally flipping each.
 *
 * The flipped left-mirror content lands in the right rect and vice versa;
 * pixels outside both rects are untouched. Applying the operation twice
 * restores the input exactly.
 */
inline ImageBuffer mirror_reflect(const ImageBuffer& img, const PixelRect& left_rect,
                                  const PixelRect& right_rect) {
  if (!detail::rect_in_bounds(left_rect, img) || !detail::rect_in_bounds(right_rect, img)) {
    raise("rect_invalid", "mirror_reflect: rect outside image bounds");
  }
  if (left_rect.w != right_rect.w || left_rect.h != right_rect.h) {
    raise("rect_invalid", "mirror_reflect: rects must have equal sizes");
  }
  if (detail::rects_overlap(left_rect, right_rect)) {
    raise("rect_invalid", "mirror_reflect: rects overlap");
  }

  ImageBuffer out = img;
  const int w = left_rect.w, h = left_rect.h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xf = w - 1 - x;  // horizontal flip inside the crop
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.at(right_rect.x + x, right_rect.y + y, c) =
            img.at(left_rect.x + xf, left_rect.y + y, c);
        out.at(left_rect.x + x, left_rect.y + y, c) =
            img.at(right_rect.x + xf, right_rect.y + y, c);
      }
    }
  }
  return out;
}

}  // namespace umi
