#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace swidernet {

// 8-bit RGB image, row-major, interleaved channels.
struct Image {
  int height = 0, width = 0;
  std::vector<std::uint8_t> data;  // height * width * 3

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::uint8_t& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

enum class AugOpKind { Sharpness, Brightness, Equalize, Contrast, Color, Solarize };

struct AugOp {
  AugOpKind kind;
  double prob;       // in [0, 1]
  double magnitude;  // >= 0
};

struct SubPolicy {
  std::array<AugOp, 2> ops;
};

struct AugPolicy {
  std::vector<SubPolicy> sub_policies;
};

// The five-sub-policy augmentation table used for training.
AugPolicy default_policy();

// Enhance ops blend toward a degenerate image with factor = magnitude
// (factor 1 is the identity); Equalize ignores the magnitude; Solarize
// inverts pixels >= clamp(round(256*(1 - magnitude/10)), 0, 255).
Image apply_op(const Image& img, AugOpKind kind, double magnitude);

int sample_subpolicy(const AugPolicy& policy, std::mt19937_64& rng);

Image apply_subpolicy(const Image& img, const SubPolicy& sp, std::mt19937_64& rng);

// Multiplies every magnitude by `factor`; Solarize magnitudes are clamped to
// <= 10 afterwards. Probabilities are unchanged.
AugPolicy scale_magnitudes(const AugPolicy& policy, double factor);

const char* op_name(AugOpKind kind);
std::string policy_table(const AugPolicy& policy);

// Binary PPM (P6, maxval 255)
Image load_ppm(const std::string& path);
void save_ppm(const Image& img, const std::string& path);

}  // namespace swidernet
