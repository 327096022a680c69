#pragma once

// SVG chessboard heatmaps and heatmap overlays for frames. All output is a
// pure function of the inputs.

#include <fmt/format.h>
#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sarfa/chess.hpp"
#include "sarfa/errors.hpp"
#include "sarfa/image.hpp"

namespace sarfa::render {

enum class Colormap : std::uint8_t { red_alpha, viridis };

inline std::optional<Colormap> parse_colormap(std::string_view s) noexcept {
  if (s == "red_alpha") return Colormap::red_alpha;
  if (s == "viridis") return Colormap::viridis;
  return std::nullopt;
}

struct HeatmapStyle {
  Colormap colormap = Colormap::red_alpha;
  double min = 0.0;
  double max = 1.0;
  double opacity = 0.85;  // opacity at the top of the range

  void check() const {
    if (!(min < max)) throw ContractViolation("heatmap style needs min < max");
    if (!(opacity > 0.0 && opacity <= 1.0)) throw ContractViolation("heatmap opacity must lie in (0,1]");
  }

  /// Score mapped to [0,1] against the style's clamp range.
  double level(double score) const {
    if (!std::isfinite(score)) return 0.0;
    return std::clamp((score - min) / (max - min), 0.0, 1.0);
  }
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Colour for a level in [0,1]. red_alpha is solid red and relies on opacity.
inline Rgb colour(Colormap map, double t) {
  if (map == Colormap::red_alpha) return {220, 20, 20};
  // Coarse viridis, linear between samples.
  static constexpr std::array<Rgb, 5> kViridis = {
      Rgb{68, 1, 84}, Rgb{59, 82, 139}, Rgb{33, 145, 140}, Rgb{94, 201, 98}, Rgb{253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * (kViridis.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(t), kViridis.size() - 2);
  const double f = t - static_cast<double>(i);
  auto mix = [&](std::uint8_t a, std::uint8_t b) {
    return static_cast<std::uint8_t>(std::lround(a + (b - a) * f));
  };
  return {mix(kViridis[i].r, kViridis[i + 1].r), mix(kViridis[i].g, kViridis[i + 1].g),
          mix(kViridis[i].b, kViridis[i + 1].b)};
}

// ---------------------------------------------------------------------------
// Chess

inline std::string_view piece_glyph(char p) {
  switch (p) {
    case 'K': return "♔";
    case 'Q': return "♕";
    case 'R': return "♖";
    case 'B': return "♗";
    case 'N': return "♘";
    case 'P': return "♙";
    case 'k': return "♚";
    case 'q': return "♛";
    case 'r': return "♜";
    case 'b': return "♝";
    case 'n': return "♞";
    case 'p': return "♟";
    default: return "";
  }
}

/// 8x8 board from White's side with a tint on every square whose level is
/// positive. `scores` maps square names to scores; missing squares are 0.
inline std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

/// `metadata`, when given, is escaped into a <metadata> element.
inline std::string chess_svg(const chess::Position& pos, const std::map<std::string, double>& scores,
                             const HeatmapStyle& style = {}, std::string_view metadata = {}) {
  style.check();
  constexpr int kCell = 60;
  constexpr int kMargin = 20;
  constexpr int kSize = 8 * kCell + 2 * kMargin;
  std::string out;
  out += fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{0}\" "
      "viewBox=\"0 0 {0} {0}\">\n",
      kSize);
  if (!metadata.empty()) out += "<metadata>" + xml_escape(metadata) + "</metadata>\n";
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{0}\" fill=\"#ffffff\"/>\n", kSize);
  for (int rank = 7; rank >= 0; --rank)
    for (int file = 0; file < 8; ++file) {
      const int x = kMargin + file * kCell;
      const int y = kMargin + (7 - rank) * kCell;
      const bool light = (file + rank) % 2 == 1;
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", x, y, kCell, kCell,
                         light ? "#f0d9b5" : "#b58863");
      const auto name = chess::square_name(chess::make_square(file, rank));
      const auto it = scores.find(name);
      const double t = it == scores.end() ? 0.0 : style.level(it->second);
      if (t > 0.0) {
        const Rgb c = colour(style.colormap, t);
        const double alpha = style.colormap == Colormap::red_alpha ? t * style.opacity : style.opacity;
        out += fmt::format(
            "<rect class=\"heat\" data-square=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" "
            "fill=\"#{:02x}{:02x}{:02x}\" fill-opacity=\"{:.4f}\"/>\n",
            name, x, y, kCell, kCell, c.r, c.g, c.b, alpha);
      }
      const char p = pos.at(chess::make_square(file, rank));
      if (p != '.')
        out += fmt::format(
            "<text x=\"{}\" y=\"{}\" font-size=\"46\" text-anchor=\"middle\" dominant-baseline=\"central\">{}</text>\n",
            x + kCell / 2, y + kCell / 2, piece_glyph(p));
    }
  for (int i = 0; i < 8; ++i) {
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                       kMargin + i * kCell + kCell / 2, kSize - 5, static_cast<char>('a' + i));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n", kMargin / 2,
                       kMargin + (7 - i) * kCell + kCell / 2 + 4, i + 1);
  }
  out += "</svg>\n";
  return out;
}

// ---------------------------------------------------------------------------
// Frames

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB
};

/// Heatmap alpha-blended over the frame's first channel (as grayscale).
/// `heat` is width x height, row-major.
inline RgbImage overlay_frame(const image::Frame& frame, const std::vector<double>& heat,
                              const HeatmapStyle& style = {}) {
  style.check();
  if (heat.size() != frame.plane()) throw ContractViolation("heatmap size does not match the frame");
  RgbImage out{frame.width, frame.height, std::vector<std::uint8_t>(frame.plane() * 3)};
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * frame.width + x;
      const double g = std::clamp(frame.at(x, y), 0.0, 1.0) * 255.0;
      const double t = style.level(heat[i]);
      const Rgb c = colour(style.colormap, t);
      const double a = t > 0.0 ? (style.colormap == Colormap::red_alpha ? t * style.opacity : style.opacity) : 0.0;
      auto blend = [&](std::uint8_t v) { return static_cast<std::uint8_t>(std::lround((1.0 - a) * g + a * v)); };
      out.data[3 * i] = blend(c.r);
      out.data[3 * i + 1] = blend(c.g);
      out.data[3 * i + 2] = blend(c.b);
    }
  return out;
}

/// Heat levels as a grayscale PGM image.
inline std::string heat_pgm(int width, int height, const std::vector<double>& heat, const HeatmapStyle& style = {},
                            std::string_view comment = {}) {
  style.check();
  std::vector<double> levels(heat.size());
  std::transform(heat.begin(), heat.end(), levels.begin(), [&](double v) { return style.level(v); });
  return image::encode_pgm(width, height, levels, comment);
}

inline std::string encode_ppm(const RgbImage& img, std::string_view comment = {}) {
  if (comment.find('\n') != std::string_view::npos) throw ContractViolation("PPM comment must be one line");
  std::string out = "P6\n";
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(img.data.begin(), img.data.end());
  return out;
}

/// `text` is stored as tEXt chunks (keyword -> Latin-1 text) right after IHDR.
inline std::string encode_png(const RgbImage& img, const std::map<std::string, std::string>& text = {}) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width);
  desc.height = static_cast<png_uint_32>(img.height);
  desc.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, img.data.data(), 0, nullptr))
    throw IoError(std::string("PNG encoding failed: ") + desc.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, img.data.data(), 0, nullptr))
    throw IoError(std::string("PNG encoding failed: ") + desc.message);
  out.resize(size);
  if (text.empty()) return out;

  constexpr std::size_t kAfterIhdr = 8 + 4 + 4 + 13 + 4;
  std::string chunks;
  for (const auto& [key, value] : text) {
    if (key.empty() || key.size() > 79) throw ContractViolation("PNG text keyword must be 1-79 bytes");
    std::string body = "tEXt" + key;
    body.push_back('\0');
    body += value;
    const auto len = static_cast<std::uint32_t>(body.size() - 4);
    const auto crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    for (int shift : {24, 16, 8, 0}) chunks.push_back(static_cast<char>((len >> shift) & 0xff));
    chunks += body;
    for (int shift : {24, 16, 8, 0}) chunks.push_back(static_cast<char>((crc >> shift) & 0xff));
  }
  out.insert(kAfterIhdr, chunks);
  return out;
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace sarfa::render
