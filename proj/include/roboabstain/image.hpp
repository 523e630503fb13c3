#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "roboabstain/error.hpp"
#include "roboabstain/hash.hpp"
#include "roboabstain/io.hpp"

namespace roboabstain {

inline constexpr int kMaxImageEdge = 640;

struct Dimensions {
  int width = 0;
  int height = 0;
  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

/// Target size so the longest edge is at most `max_edge`, aspect preserved.
/// The long edge becomes exactly `max_edge`; the short edge is rounded half
/// away from zero and never drops below 1. Sizes already within the bound
/// are returned unchanged.
inline Dimensions fit_within(Dimensions d, int max_edge = kMaxImageEdge) {
  if (d.width < 1 || d.height < 1) throw Error(ErrorKind::undecodable_image, "image has an empty dimension");
  const int long_edge = std::max(d.width, d.height);
  if (long_edge <= max_edge) return d;
  auto scale_short = [&](int short_edge) {
    // round(short * max / long) for positive integers, halves away from zero
    const std::int64_t num = 2 * static_cast<std::int64_t>(short_edge) * max_edge + long_edge;
    return std::max<int>(1, static_cast<int>(num / (2 * static_cast<std::int64_t>(long_edge))));
  };
  if (d.width >= d.height) return {max_edge, scale_short(d.height)};
  return {scale_short(d.width), max_edge};
}

inline cv::Mat decode_image(const std::string& bytes) {
  if (bytes.empty()) throw Error(ErrorKind::undecodable_image, "empty file");
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<char*>(bytes.data()));
  cv::Mat img = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (img.empty()) throw Error(ErrorKind::undecodable_image, "not a decodable image");
  return img;
}

/// Downscales so the longest edge is at most 640 px. Images already within
/// the bound come back unchanged (same pixels, same size).
inline cv::Mat preprocess_image(const cv::Mat& image) {
  if (image.empty()) throw Error(ErrorKind::undecodable_image, "empty raster");
  const Dimensions in{image.cols, image.rows};
  const Dimensions out = fit_within(in);
  if (out == in) return image.clone();
  cv::Mat resized;
  cv::resize(image, resized, cv::Size(out.width, out.height), 0, 0, cv::INTER_AREA);
  return resized;
}

inline std::string encode_png(const cv::Mat& image) {
  std::vector<unsigned char> buf;
  if (!cv::imencode(".png", image, buf)) throw Error(ErrorKind::undecodable_image, "PNG encoding failed");
  return std::string(buf.begin(), buf.end());
}

struct ImageRef {
  fs::path path;
  std::string content_hash;  // sha256 of the file bytes
  int width = 0;
  int height = 0;
};

/// An image ready to send: its reference plus the preprocessed PNG bytes.
struct PreparedImage {
  ImageRef ref;
  std::string png;
};

inline PreparedImage prepare_image(const fs::path& path) {
  const std::string bytes = read_file(path);
  cv::Mat decoded = decode_image(bytes);
  PreparedImage out;
  out.ref = {path, sha256_hex(bytes), decoded.cols, decoded.rows};
  out.png = encode_png(preprocess_image(decoded));
  return out;
}

inline std::string png_data_url(const std::string& png) { return "data:image/png;base64," + base64_encode(png); }

}  // namespace roboabstain
