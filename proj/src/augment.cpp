#include "swidernet/augment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace swidernet {

AugPolicy default_policy() {
  using K = AugOpKind;
  AugPolicy p;
  p.sub_policies = {
      SubPolicy{{AugOp{K::Sharpness, 0.4, 1.4}, AugOp{K::Brightness, 0.2, 2.0}}},
      SubPolicy{{AugOp{K::Equalize, 0.0, 1.8}, AugOp{K::Contrast, 0.2, 2.0}}},
      SubPolicy{{AugOp{K::Sharpness, 0.2, 1.8}, AugOp{K::Color, 0.2, 1.8}}},
      SubPolicy{{AugOp{K::Solarize, 0.2, 1.4}, AugOp{K::Equalize, 0.6, 1.8}}},
      SubPolicy{{AugOp{K::Sharpness, 0.2, 0.2}, AugOp{K::Equalize, 0.2, 1.4}}},
  };
  return p;
}

namespace {

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, std::round(v))));
}

std::uint8_t luma(const Image& img, int y, int x) {
  return clamp_u8(0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                  0.114 * img.at(y, x, 2));
}

Image degenerate_image(const Image& img, AugOpKind kind) {
  Image deg(img.height, img.width);
  switch (kind) {
    case AugOpKind::Brightness:
      return deg;  // black
    case AugOpKind::Color:
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const std::uint8_t g = luma(img, y, x);
          deg.at(y, x, 0) = deg.at(y, x, 1) = deg.at(y, x, 2) = g;
        }
      return deg;
    case AugOpKind::Contrast: {
      double sum = 0;
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) sum += luma(img, y, x);
      const std::uint8_t mean =
          clamp_u8(sum / (static_cast<double>(img.height) * img.width));
      for (auto& v : deg.data) v = mean;
      return deg;
    }
    case AugOpKind::Sharpness: {
      // 3x3 smoothing of the interior; the one-pixel border stays unchanged
      deg = img;
      static const double k[3][3] = {{1, 1, 1}, {1, 5, 1}, {1, 1, 1}};
      for (int y = 1; y + 1 < img.height; ++y)
        for (int x = 1; x + 1 < img.width; ++x)
          for (int c = 0; c < 3; ++c) {
            double acc = 0;
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx)
                acc += k[dy + 1][dx + 1] * img.at(y + dy, x + dx, c);
            deg.at(y, x, c) = clamp_u8(acc / 13.0);
          }
      return deg;
    }
    default:
      throw std::invalid_argument("degenerate_image: not an enhance op");
  }
}

Image equalize(const Image& img) {
  Image out = img;
  const long long total = static_cast<long long>(img.height) * img.width;
  for (int c = 0; c < 3; ++c) {
    long long hist[256] = {0};
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) hist[img.at(y, x, c)]++;
    int last_nonzero = 255;
    while (last_nonzero > 0 && hist[last_nonzero] == 0) --last_nonzero;
    const long long step = (total - hist[last_nonzero]) / 255;
    std::uint8_t lut[256];
    if (step == 0) {
      for (int i = 0; i < 256; ++i) lut[i] = static_cast<std::uint8_t>(i);
    } else {
      long long n = step / 2;
      for (int i = 0; i < 256; ++i) {
        lut[i] = static_cast<std::uint8_t>(std::min<long long>(255, n / step));
        n += hist[i];
      }
    }
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) out.at(y, x, c) = lut[img.at(y, x, c)];
  }
  return out;
}

}  // namespace

Image apply_op(const Image& img, AugOpKind kind, double magnitude) {
  if (magnitude < 0) throw std::invalid_argument("apply_op: magnitude must be >= 0");
  switch (kind) {
    case AugOpKind::Equalize:
      return equalize(img);  // magnitude ignored
    case AugOpKind::Solarize: {
      const int threshold = static_cast<int>(
          std::min(255.0, std::max(0.0, std::round(256.0 * (1.0 - magnitude / 10.0)))));
      Image out = img;
      for (auto& v : out.data)
        if (v >= threshold) v = static_cast<std::uint8_t>(255 - v);
      return out;
    }
    case AugOpKind::Sharpness:
    case AugOpKind::Brightness:
    case AugOpKind::Contrast:
    case AugOpKind::Color: {
      const Image deg = degenerate_image(img, kind);
      Image out(img.height, img.width);
      for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = clamp_u8(deg.data[i] +
                               magnitude * (static_cast<double>(img.data[i]) -
                                            deg.data[i]));
      return out;
    }
  }
  throw std::invalid_argument("apply_op: unknown op kind");
}

int sample_subpolicy(const AugPolicy& policy, std::mt19937_64& rng) {
  if (policy.sub_policies.empty())
    throw std::invalid_argument("sample_subpolicy: empty policy");
  std::uniform_int_distribution<int> dist(
      0, static_cast<int>(policy.sub_policies.size()) - 1);
  return dist(rng);
}

Image apply_subpolicy(const Image& img, const SubPolicy& sp, std::mt19937_64& rng) {
  Image out = img;
  for (const AugOp& op : sp.ops) {
    std::bernoulli_distribution apply(op.prob);
    if (apply(rng)) out = apply_op(out, op.kind, op.magnitude);
  }
  return out;
}

AugPolicy scale_magnitudes(const AugPolicy& policy, double factor) {
  if (factor <= 0) throw std::invalid_argument("scale_magnitudes: factor must be > 0");
  AugPolicy out = policy;
  for (auto& sp : out.sub_policies)
    for (auto& op : sp.ops) {
      op.magnitude *= factor;
      if (op.kind == AugOpKind::Solarize) op.magnitude = std::min(op.magnitude, 10.0);
    }
  return out;
}

const char* op_name(AugOpKind kind) {
  switch (kind) {
    case AugOpKind::Sharpness: return "Sharpness";
    case AugOpKind::Brightness: return "Brightness";
    case AugOpKind::Equalize: return "Equalize";
    case AugOpKind::Contrast: return "Contrast";
    case AugOpKind::Color: return "Color";
    case AugOpKind::Solarize: return "Solarize";
  }
  return "?";
}

std::string policy_table(const AugPolicy& policy) {
  std::ostringstream out;
  out << "sub-policy | op1 prob mag | op2 prob mag\n";
  for (std::size_t i = 0; i < policy.sub_policies.size(); ++i) {
    const auto& sp = policy.sub_policies[i];
    out << (i + 1);
    for (const AugOp& op : sp.ops)
      out << " | " << op_name(op.kind) << " " << op.prob << " " << op.magnitude;
    out << "\n";
  }
  return out.str();
}

namespace {

int next_ppm_int(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v;
  if (!(in >> v)) throw std::runtime_error("malformed PPM header");
  return v;
}

}  // namespace

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw std::runtime_error("not a binary PPM (P6): " + path);
  const int w = next_ppm_int(in);
  const int h = next_ppm_int(in);
  const int maxval = next_ppm_int(in);
  if (maxval != 255) throw std::runtime_error("PPM maxval must be 255: " + path);
  in.get();  // single whitespace after header
  Image img(h, w);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (!in) throw std::runtime_error("truncated PPM data: " + path);
  return img;
}

void save_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
}

}  // namespace swidernet
