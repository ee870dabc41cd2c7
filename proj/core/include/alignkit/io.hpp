#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "alignkit/tensor.hpp"

namespace alignkit {

// VTEN layout: "VTEN", u8 version (1), u8 rank, rank x u32 LE extents,
// then the f32 LE row-major payload.

void write_vten(std::ostream& os, const Tensor& t);
Tensor read_vten(std::istream& is);
void save_vten(const std::filesystem::path& path, const Tensor& t);
Tensor load_vten(const std::filesystem::path& path);

/// 8-bit binary PPM (P6, 3 channels) or PGM (P5, 1 channel). Values are
/// clamped to [0,1] and rounded to the nearest code on write.
void save_image(const std::filesystem::path& path, const Tensor& img);
/// Reads P5/P6 into a (1|3,H,W) tensor with values code/255.
Tensor load_image(const std::filesystem::path& path);

/// Rounds every value to the nearest 8-bit code / 255, the same mapping
/// save_image uses, so quantized tensors survive a PPM round trip exactly.
Tensor quantize_8bit(const Tensor& t);

/// Ordered set of named tensors stored as `tensors.vten` (concatenated VTEN
/// records) plus an `index.json` sidecar giving each record's name, byte
/// offset and extents.
class TensorArchive {
 public:
  void put(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t size() const { return tensors_.size(); }
  const std::map<std::string, Tensor>& entries() const { return tensors_; }

  void save(const std::filesystem::path& dir) const;
  static TensorArchive load(const std::filesystem::path& dir);

 private:
  std::map<std::string, Tensor> tensors_;
};

}  // namespace alignkit
