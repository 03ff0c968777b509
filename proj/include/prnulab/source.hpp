#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "prnulab/codec.hpp"

namespace prnulab {

// Where pipeline stages obtain decoded images by id. Implementations must
// be safe to call concurrently.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual DecodedImage load(const std::string& image_id) const = 0;
};

// Image ids are paths, resolved against `root` when relative.
class FileImageSource final : public ImageSource {
 public:
  explicit FileImageSource(std::filesystem::path root = {}) : root_(std::move(root)) {}

  DecodedImage load(const std::string& image_id) const override {
    std::filesystem::path p(image_id);
    if (p.is_relative() && !root_.empty()) p = root_ / p;
    return decode_image(p);
  }

 private:
  std::filesystem::path root_;
};

class MemoryImageSource final : public ImageSource {
 public:
  void add(std::string id, DecodedImage img) { images_.insert_or_assign(std::move(id), std::move(img)); }

  DecodedImage load(const std::string& image_id) const override {
    auto it = images_.find(image_id);
    if (it == images_.end()) throw Error(ErrorKind::lookup, "unknown image '" + image_id + "'");
    return it->second;
  }

 private:
  std::map<std::string, DecodedImage> images_;
};

}  // namespace prnulab
