#pragma once

#include <string>
#include <vector>

#include "capvst/cwct.hpp"
#include "capvst/metrics.hpp"
#include "capvst/revnet.hpp"
#include "capvst/tensor.hpp"

namespace capvst {

// Binary PPM (P6) / PGM (P5), 8-bit, giving 3 or 1 channels. Samples map to
// [0,1] by /255.
Tensor read_image(const std::string& path);
// Values are clamped to [0,1] and rounded to the nearest 8-bit level.
void write_image(const std::string& path, const Tensor& image);

// Gray PGM as integer labels (the raw byte values).
RegionMask read_mask(const std::string& path);
void write_mask(const std::string& path, const RegionMask& mask);

// Middlebury .flo. The valid mask, if given, is a PGM where 255 = valid;
// without it every pixel is valid.
FlowField read_flow(const std::string& flo_path, const std::string& valid_mask_path = {});
void write_flow(const std::string& path, const FlowField& flow);

// Weight file: "CAPW", u32 version, u32 header length, JSON header holding the
// plan and the tensor manifest, then little-endian float32 payload in manifest
// order.
inline constexpr std::uint32_t kWeightFileVersion = 1;

std::vector<unsigned char> encode_weights(const NetworkWeights& w);
NetworkWeights decode_weights(const std::vector<unsigned char>& bytes);
void save_weights(const std::string& path, const NetworkWeights& w);
NetworkWeights load_weights(const std::string& path);

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<unsigned char>& bytes);

}  // namespace capvst
