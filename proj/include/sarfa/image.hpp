#pragma once

// Frame perturbation by localized Gaussian blur, and pixel-grid saliency for
// agents that consume frames.
//
// A perturbed frame is (1 - M) * frame + M * blur(frame), with M a Gaussian
// mask of peak 1 centred on the probed pixel. Centres sit on a stride grid,
// one per stride x stride cell, at the cell's middle pixel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sarfa/errors.hpp"
#include "sarfa/oracle.hpp"
#include "sarfa/saliency.hpp"

namespace sarfa::image {

/// Grayscale intensities in [0,1], row-major, channel-planar.
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> pixels;

  Frame() = default;
  Frame(int w, int h, int c = 1, double fill = 0.0)
      : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {
    if (w <= 0 || h <= 0 || c <= 0) throw ContractViolation("frame dimensions must be positive");
  }

  std::size_t plane() const noexcept { return static_cast<std::size_t>(width) * height; }
  double& at(int x, int y, int c = 0) { return pixels[c * plane() + y * width + x]; }
  double at(int x, int y, int c = 0) const { return pixels[c * plane() + y * width + x]; }

  void check() const {
    if (pixels.size() != plane() * channels) throw ContractViolation("frame size mismatch");
    for (double v : pixels)
      if (!(v >= 0.0 && v <= 1.0)) throw ContractViolation("frame intensity outside [0,1]");
  }

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct BlurSpec {
  double sigma_blur = 3.0;
  double sigma_mask = 5.0;
  int stride = 5;

  void check() const {
    if (!(sigma_blur > 0.0) || !(sigma_mask > 0.0) || stride < 1)
      throw ContractViolation("blur spec values must be positive");
  }
};

/// Separable Gaussian blur, replicated borders, per channel.
inline Frame gaussian_blur(const Frame& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  Frame tmp = in;
  Frame out = in;
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * in.at(std::clamp(x + i, 0, in.width - 1), y, c);
        tmp.at(x, y, c) = acc;
      }
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp.at(x, std::clamp(y + i, 0, in.height - 1), c);
        out.at(x, y, c) = std::clamp(acc, 0.0, 1.0);
      }
  }
  return out;
}

/// Mask-weighted blend of `frame` and its precomputed `blurred` version.
inline Frame blend_at(const Frame& frame, const Frame& blurred, int cx, int cy, double sigma_mask) {
  Frame out = frame;
  const double inv = 1.0 / (2.0 * sigma_mask * sigma_mask);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      const double d2 = double(x - cx) * (x - cx) + double(y - cy) * (y - cy);
      const double m = std::clamp(std::exp(-d2 * inv), 0.0, 1.0);
      if (m == 0.0) continue;
      for (int c = 0; c < frame.channels; ++c)
        out.at(x, y, c) = std::clamp((1.0 - m) * frame.at(x, y, c) + m * blurred.at(x, y, c), 0.0, 1.0);
    }
  return out;
}

inline Frame perturb_frame(const Frame& frame, int cx, int cy, const BlurSpec& spec) {
  spec.check();
  if (cx < 0 || cy < 0 || cx >= frame.width || cy >= frame.height)
    throw ContractViolation("perturbation centre outside the frame");
  return blend_at(frame, gaussian_blur(frame, spec.sigma_blur), cx, cy, spec.sigma_mask);
}

/// 8-bit row-major payload handed to external agents.
inline std::string frame_payload(const Frame& f) {
  std::string out(f.pixels.size(), '\0');
  for (std::size_t i = 0; i < f.pixels.size(); ++i)
    out[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(f.pixels[i], 0.0, 1.0) * 255.0)));
  return out;
}

inline Frame frame_from_payload(std::string_view bytes, int width, int height, int channels = 1) {
  Frame f(width, height, channels);
  if (bytes.size() != f.pixels.size()) throw InputError("frame payload has the wrong size");
  for (std::size_t i = 0; i < bytes.size(); ++i)
    f.pixels[i] = static_cast<std::uint8_t>(bytes[i]) / 255.0;
  return f;
}

/// Centre coordinate of grid cell `g` along an axis of length `extent`.
inline int grid_center(int g, int stride, int extent) {
  return std::min(g * stride + stride / 2, extent - 1);
}

struct FrameSaliency {
  int grid_width = 0;
  int grid_height = 0;
  int stride = 1;
  std::vector<ScoreBreakdown> cells;  // row-major over the grid
  std::vector<double> upsampled;      // width x height, bilinear

  const ScoreBreakdown& cell(int gx, int gy) const { return cells[gy * grid_width + gx]; }
};

/// Bilinear interpolation of grid scores sampled at cell centres; clamped at
/// the borders.
inline std::vector<double> upsample(const std::vector<double>& grid, int gw, int gh, int stride,
                                    int width, int height) {
  auto sample_axis = [&](int pos, int cells, int extent, int& lo, int& hi, double& t) {
    lo = 0;
    while (lo + 1 < cells && grid_center(lo + 1, stride, extent) <= pos) ++lo;
    hi = std::min(lo + 1, cells - 1);
    const int a = grid_center(lo, stride, extent);
    const int b = grid_center(hi, stride, extent);
    t = (hi == lo || b == a) ? 0.0 : std::clamp(double(pos - a) / double(b - a), 0.0, 1.0);
  };
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    int y0, y1;
    double ty;
    sample_axis(y, gh, height, y0, y1, ty);
    for (int x = 0; x < width; ++x) {
      int x0, x1;
      double tx;
      sample_axis(x, gw, width, x0, x1, tx);
      const double top = (1 - tx) * grid[y0 * gw + x0] + tx * grid[y0 * gw + x1];
      const double bottom = (1 - tx) * grid[y1 * gw + x0] + tx * grid[y1 * gw + x1];
      out[y * width + x] = (1 - ty) * top + ty * bottom;
    }
  }
  return out;
}

/// Blurs around every stride-grid centre, queries the pool and scores the
/// change. Oracle failures at a centre mark that cell skipped.
inline FrameSaliency compute_frame_saliency(const Frame& frame, const std::string& selected,
                                            SessionPool& pool, const BlurSpec& spec,
                                            const ScoringSpec& scoring = {}) {
  frame.check();
  spec.check();
  const auto original = [&] {
    auto lease = pool.acquire();
    return lease->evaluate(frame_payload(frame));
  }();
  if (!original.contains(selected))
    throw InputError("action '" + selected + "' is not among the agent's actions");

  FrameSaliency out;
  out.stride = spec.stride;
  out.grid_width = (frame.width + spec.stride - 1) / spec.stride;
  out.grid_height = (frame.height + spec.stride - 1) / spec.stride;
  out.cells.resize(static_cast<std::size_t>(out.grid_width) * out.grid_height);
  const Frame blurred = gaussian_blur(frame, spec.sigma_blur);

  pool.parallel_for(out.cells.size(), [&](Oracle& oracle, std::size_t i) {
    const int gx = static_cast<int>(i) % out.grid_width;
    const int gy = static_cast<int>(i) / out.grid_width;
    const int cx = grid_center(gx, spec.stride, frame.width);
    const int cy = grid_center(gy, spec.stride, frame.height);
    ScoreBreakdown b;
    try {
      const auto q = oracle.evaluate(frame_payload(blend_at(frame, blurred, cx, cy, spec.sigma_mask)));
      b = score_feature(original, q, selected, scoring);
    } catch (const OracleError&) {
      b.status = ScoreStatus::skipped_invalid_perturbation;
    } catch (const ContractViolation&) {
      b.status = ScoreStatus::skipped_invalid_perturbation;
    }
    b.feature_id = std::to_string(cx) + "," + std::to_string(cy);
    out.cells[i] = std::move(b);
  });

  std::vector<double> scores(out.cells.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = out.cells[i].score;
  out.upsampled = upsample(scores, out.grid_width, out.grid_height, spec.stride, frame.width, frame.height);
  return out;
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval <= 255)

inline Frame read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  if (next_token() != "P5") throw InputError(path + " is not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw InputError(path + " has a malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw InputError(path + " has unsupported PGM geometry");
  std::string bytes(static_cast<std::size_t>(w) * h, '\0');
  if (!in.read(bytes.data(), static_cast<std::streamsize>(bytes.size())))
    throw InputError(path + " is truncated");
  Frame f(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    f.pixels[i] = static_cast<std::uint8_t>(bytes[i]) / static_cast<double>(maxval);
  return f;
}

/// `comment` lands on a single '#' line after the magic number.
inline std::string encode_pgm(int width, int height, const std::vector<double>& values,
                              std::string_view comment = {}) {
  if (comment.find('\n') != std::string_view::npos) throw ContractViolation("PGM comment must be one line");
  std::string out = "P5\n";
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (double v : values)
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  return out;
}

inline void write_pgm(const std::string& path, const Frame& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  const std::vector<double> first(f.pixels.begin(), f.pixels.begin() + static_cast<std::ptrdiff_t>(f.plane()));
  out << encode_pgm(f.width, f.height, first);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace sarfa::image
