#include "capvst/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

namespace capvst {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

namespace {

struct Netpbm {
  int width = 0;
  int height = 0;
  int channels = 0;
  const unsigned char* pixels = nullptr;
};

// Parses the P5/P6 header, skipping '#' comments.
Netpbm parse_netpbm(const std::vector<unsigned char>& bytes, const std::string& path) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw IoError(path + ": malformed netpbm header");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1 << 24)) throw IoError(path + ": netpbm dimension too large");
    }
    return int(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw IoError(path + ": not a binary PGM/PPM file");
  }
  Netpbm img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  img.width = read_int();
  img.height = read_int();
  const int maxval = read_int();
  if (img.width <= 0 || img.height <= 0) throw IoError(path + ": empty image");
  if (maxval != 255) throw IoError(path + ": only 8-bit (maxval 255) images are supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw IoError(path + ": malformed netpbm header");
  }
  ++pos;
  const std::size_t need = std::size_t(img.width) * img.height * img.channels;
  if (bytes.size() - pos < need) throw IoError(path + ": truncated pixel data");
  img.pixels = bytes.data() + pos;
  return img;
}

std::vector<unsigned char> netpbm_header(char kind, int w, int h) {
  const std::string head =
      std::string("P") + kind + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  return {head.begin(), head.end()};
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

void put_f32(std::vector<unsigned char>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace

Tensor read_image(const std::string& path) {
  const auto bytes = read_file(path);
  const Netpbm img = parse_netpbm(bytes, path);
  const int channels = img.channels;
  Tensor out(channels, img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const unsigned char* px = img.pixels + (std::size_t(y) * img.width + x) * channels;
      for (int c = 0; c < channels; ++c) out(c, y, x) = px[c] / 255.0f;
    }
  }
  return out;
}

void write_image(const std::string& path, const Tensor& image) {
  if (image.channels() != 3 && image.channels() != 1) {
    throw ShapeError("write_image: need 1 or 3 channels, got " + image.shape_string());
  }
  auto bytes = netpbm_header(image.channels() == 3 ? '6' : '5', image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        float v = image(c, y, x);
        if (!std::isfinite(v)) v = 0.0f;
        v = std::clamp(v, 0.0f, 1.0f);
        bytes.push_back(static_cast<unsigned char>(std::lround(v * 255.0f)));
      }
    }
  }
  write_file(path, bytes);
}

RegionMask read_mask(const std::string& path) {
  const auto bytes = read_file(path);
  const Netpbm img = parse_netpbm(bytes, path);
  if (img.channels != 1) throw IoError(path + ": expected a gray PGM (P5) mask");
  std::vector<int> labels(img.pixels, img.pixels + std::size_t(img.width) * img.height);
  return RegionMask(img.height, img.width, std::move(labels));
}

void write_mask(const std::string& path, const RegionMask& mask) {
  auto bytes = netpbm_header('5', mask.width, mask.height);
  for (int label : mask.labels) {
    if (label < 0 || label > 255) throw IoError("mask label " + std::to_string(label) + " does not fit in 8 bits");
    bytes.push_back(static_cast<unsigned char>(label));
  }
  write_file(path, bytes);
}

FlowField read_flow(const std::string& flo_path, const std::string& valid_mask_path) {
  const auto bytes = read_file(flo_path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "PIEH", 4) != 0) {
    throw IoError(flo_path + ": missing PIEH magic");
  }
  const auto w = static_cast<std::int32_t>(get_u32(bytes.data() + 4));
  const auto h = static_cast<std::int32_t>(get_u32(bytes.data() + 8));
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) {
    throw IoError(flo_path + ": bad dimensions");
  }
  const std::size_t n = std::size_t(w) * h;
  if (bytes.size() < 12 + n * 8) throw IoError(flo_path + ": truncated flow data");
  FlowField flow(h, w);
  const unsigned char* p = bytes.data() + 12;
  for (std::size_t i = 0; i < n; ++i, p += 8) {
    flow.u[i] = get_f32(p);
    flow.v[i] = get_f32(p + 4);
  }
  if (!valid_mask_path.empty()) {
    const RegionMask m = read_mask(valid_mask_path);
    if (m.height != h || m.width != w) {
      throw IoError(valid_mask_path + ": valid mask size does not match the flow");
    }
    for (std::size_t i = 0; i < n; ++i) flow.valid[i] = m.labels[i] == 255 ? 1 : 0;
  }
  try {
    flow.validate();
  } catch (const Error& e) {
    throw IoError(flo_path + ": " + e.what());
  }
  return flow;
}

void write_flow(const std::string& path, const FlowField& flow) {
  flow.validate();
  std::vector<unsigned char> bytes{'P', 'I', 'E', 'H'};
  put_u32(bytes, static_cast<std::uint32_t>(flow.width));
  put_u32(bytes, static_cast<std::uint32_t>(flow.height));
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    put_f32(bytes, flow.u[i]);
    put_f32(bytes, flow.v[i]);
  }
  write_file(path, bytes);
}

namespace {

std::string tensor_name(std::size_t block, std::size_t conv, const char* part) {
  return "block" + std::to_string(block) + ".conv" + std::to_string(conv) + "." + part;
}

}  // namespace

std::vector<unsigned char> encode_weights(const NetworkWeights& w) {
  w.validate();
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    for (std::size_t k = 0; k < w.blocks[b].convs.size(); ++k) {
      const ConvParams& c = w.blocks[b].convs[k];
      manifest.push_back({{"name", tensor_name(b, k, "weight")},
                          {"shape", {c.out_channels, c.in_channels, 3, 3}},
                          {"offset", offset}});
      offset += c.weight.size() * 4;
      manifest.push_back(
          {{"name", tensor_name(b, k, "bias")}, {"shape", {c.out_channels}}, {"offset", offset}});
      offset += c.bias.size() * 4;
    }
  }
  const nlohmann::json header = {{"plan", w.plan}, {"tensors", manifest}};
  const std::string text = header.dump();

  std::vector<unsigned char> out{'C', 'A', 'P', 'W'};
  put_u32(out, kWeightFileVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& block : w.blocks) {
    for (const auto& c : block.convs) {
      for (float f : c.weight) put_f32(out, f);
      for (float f : c.bias) put_f32(out, f);
    }
  }
  return out;
}

NetworkWeights decode_weights(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "CAPW", 4) != 0) {
    throw IoError("weight file: missing CAPW magic");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kWeightFileVersion) {
    throw IoError("weight file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t header_len = get_u32(bytes.data() + 8);
  if (header_len > bytes.size() - 12) throw IoError("weight file: header length past end of file");
  const std::size_t payload_begin = 12 + std::size_t(header_len);
  const std::size_t payload_size = bytes.size() - payload_begin;

  NetworkWeights net;
  try {
    const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + payload_begin);
    net.plan = header.at("plan").get<ArchitecturePlan>();
    net.plan.validate();

    std::size_t expected_offset = 0;
    const auto& tensors = header.at("tensors");
    std::size_t t = 0;
    auto next_entry = [&](const std::string& name) -> const nlohmann::json& {
      if (t >= tensors.size()) throw IoError("weight file: manifest ends before " + name);
      const auto& e = tensors[t++];
      if (e.at("name").get<std::string>() != name) {
        throw IoError("weight file: expected tensor " + name + ", found " +
                      e.at("name").get<std::string>());
      }
      if (e.at("offset").get<std::uint64_t>() != expected_offset) {
        throw IoError("weight file: tensor " + name + " has an unexpected offset");
      }
      return e;
    };
    auto read_floats = [&](std::vector<float>& dst, const std::string& name) {
      const std::size_t bytes_needed = dst.size() * 4;
      if (expected_offset + bytes_needed > payload_size) {
        throw IoError("weight file: payload truncated inside " + name);
      }
      const unsigned char* p = bytes.data() + payload_begin + expected_offset;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = get_f32(p + 4 * i);
      expected_offset += bytes_needed;
    };

    const std::size_t blocks = std::size_t(net.plan.total_blocks());
    for (std::size_t b = 0; b < blocks; ++b) {
      BlockWeights block;
      for (int k = 0; k < net.plan.convs_per_block; ++k) {
        const std::string wname = tensor_name(b, k, "weight");
        const auto shape = next_entry(wname).at("shape").get<std::vector<int>>();
        if (shape.size() != 4 || shape[2] != 3 || shape[3] != 3 || shape[0] <= 0 ||
            shape[1] <= 0 || shape[0] > 65536 || shape[1] > 65536) {
          throw IoError("weight file: bad shape for " + wname);
        }
        ConvParams conv(shape[0], shape[1]);
        read_floats(conv.weight, wname);
        const std::string bname = tensor_name(b, k, "bias");
        const auto bshape = next_entry(bname).at("shape").get<std::vector<int>>();
        if (bshape.size() != 1 || bshape[0] != shape[0]) {
          throw IoError("weight file: bad shape for " + bname);
        }
        read_floats(conv.bias, bname);
        block.convs.push_back(std::move(conv));
      }
      net.blocks.push_back(std::move(block));
    }
    if (t != tensors.size()) throw IoError("weight file: manifest has extra tensors");
    if (expected_offset != payload_size) {
      throw IoError("weight file: payload size " + std::to_string(payload_size) +
                    " does not match manifest (" + std::to_string(expected_offset) + ")");
    }
    net.validate();
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(std::string("weight file: ") + e.what());
  }
  for (const auto& block : net.blocks) {
    for (const auto& c : block.convs) {
      auto bad = [](float f) { return !std::isfinite(f); };
      if (std::any_of(c.weight.begin(), c.weight.end(), bad) ||
          std::any_of(c.bias.begin(), c.bias.end(), bad)) {
        throw IoError("weight file: non-finite parameter");
      }
    }
  }
  return net;
}

void save_weights(const std::string& path, const NetworkWeights& w) {
  write_file(path, encode_weights(w));
}

NetworkWeights load_weights(const std::string& path) { return decode_weights(read_file(path)); }

}  // namespace capvst
