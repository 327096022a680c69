#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "sarfa/render.hpp"

using namespace sarfa;
using namespace sarfa::render;

namespace {

int count(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kFen = "r1bqkbnr/pppp1ppp/2n5/4p3/4P3/5N2/PPPP1PPP/RNBQKB1R w KQkq - 2 3";

}  // namespace

TEST(ChessSvg, ZeroScoresHaveNoTint) {
  const auto svg = chess_svg(chess::start_position(), {});
  EXPECT_EQ(count(svg, "class=\"heat\""), 0);
  EXPECT_EQ(count(svg, "<rect x="), 65);  // background + 64 squares
  EXPECT_EQ(count(svg, "♙"), 8);
  EXPECT_EQ(count(svg, "♚"), 1);
  EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);
}

TEST(ChessSvg, SingleTintedCell) {
  const auto svg = chess_svg(chess::start_position(), {{"a4", 1.0}, {"b2", 0.0}, {"c3", -0.5}});
  EXPECT_EQ(count(svg, "class=\"heat\""), 1);
  EXPECT_NE(svg.find("data-square=\"a4\""), std::string::npos);
}

TEST(ChessSvg, OpacityIsMonotoneInScore) {
  std::map<std::string, double> scores;
  for (int i = 1; i <= 8; ++i) scores["a" + std::to_string(i)] = i / 8.0;
  const auto svg = chess_svg(chess::start_position(), scores);
  const std::regex re("data-square=\"a(\\d)\"[^>]*fill-opacity=\"([0-9.]+)\"");
  std::map<int, double> opacity;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
    opacity[std::stoi((*it)[1])] = std::stod((*it)[2]);
  ASSERT_EQ(opacity.size(), 8u);
  for (int i = 2; i <= 8; ++i) EXPECT_GT(opacity[i], opacity[i - 1]);
}

TEST(ChessSvg, MatchesGoldenFile) {
  const auto svg = chess_svg(chess::parse_fen(kFen), {{"f3", 1.0}, {"e5", 0.6}, {"c6", 0.25}});
  EXPECT_EQ(svg, slurp(std::string(GOLDEN_DIR) + "/board.svg"));
  HeatmapStyle viridis;
  viridis.colormap = Colormap::viridis;
  const auto svg2 = chess_svg(chess::parse_fen(kFen), {{"f3", 1.0}, {"e5", 0.6}, {"c6", 0.25}}, viridis);
  EXPECT_EQ(svg2, slurp(std::string(GOLDEN_DIR) + "/board_viridis.svg"));
}

TEST(ChessSvg, MetadataIsEscaped) {
  const auto svg = chess_svg(chess::start_position(), {}, {}, R"({"cmd":"a<b & c>d"})");
  EXPECT_NE(svg.find("<metadata>{&quot;cmd&quot;:&quot;a&lt;b &amp; c&gt;d&quot;}</metadata>"), std::string::npos);
  EXPECT_EQ(chess_svg(chess::start_position(), {}).find("<metadata>"), std::string::npos);
}

TEST(ChessSvg, StyleValidation) {
  HeatmapStyle s;
  s.min = 1;
  s.max = 1;
  EXPECT_THROW(chess_svg(chess::start_position(), {}, s), ContractViolation);
  s = {};
  s.opacity = 0;
  EXPECT_THROW(chess_svg(chess::start_position(), {}, s), ContractViolation);
}

TEST(OverlayFrame, ZeroAndUniformGrids) {
  image::Frame f(4, 3);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = static_cast<double>(i) / 11.0;
  const auto plain = overlay_frame(f, std::vector<double>(12, 0.0));
  for (int i = 0; i < 12; ++i) {
    const auto g = static_cast<std::uint8_t>(std::lround(f.pixels[i] * 255));
    EXPECT_EQ(plain.data[3 * i], g);
    EXPECT_EQ(plain.data[3 * i + 1], g);
    EXPECT_EQ(plain.data[3 * i + 2], g);
  }
  const image::Frame flat(4, 3, 1, 0.5);
  const auto tinted = overlay_frame(flat, std::vector<double>(12, 0.7));
  for (int i = 1; i < 12; ++i)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(tinted.data[3 * i + c], tinted.data[c]);
  EXPECT_GT(tinted.data[0], tinted.data[1]);  // reddened
  EXPECT_THROW(overlay_frame(f, std::vector<double>(5, 0.0)), ContractViolation);
}

TEST(OverlayFrame, DeterministicEncodings) {
  image::Frame f(5, 5, 1, 0.2);
  std::vector<double> heat(25);
  for (std::size_t i = 0; i < heat.size(); ++i) heat[i] = static_cast<double>(i) / 24.0;
  const auto img = overlay_frame(f, heat);
  const auto png1 = encode_png(img);
  const auto png2 = encode_png(overlay_frame(f, heat));
  EXPECT_EQ(png1, png2);
  EXPECT_EQ(png1.substr(1, 3), "PNG");
  EXPECT_EQ(encode_ppm(img).substr(0, 2), "P6");
  EXPECT_EQ(heat_pgm(5, 5, heat), heat_pgm(5, 5, heat));
  EXPECT_EQ(heat_pgm(5, 5, heat).substr(0, 2), "P5");
}

TEST(OverlayFrame, TextChunksAndComments) {
  image::Frame f(6, 4, 1, 0.4);
  const auto img = overlay_frame(f, std::vector<double>(24, 0.5));
  const auto png = encode_png(img, {{"sarfa-run", R"({"schema":1})"}});

  // Every chunk carries a valid CRC and the text chunk follows IHDR.
  std::vector<std::string> types;
  std::size_t pos = 8;
  while (pos + 12 <= png.size()) {
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = (len << 8) | static_cast<std::uint8_t>(png[pos + i]);
    const std::string body = png.substr(pos + 4, 4 + len);
    std::uint32_t crc = 0;
    for (int i = 0; i < 4; ++i) crc = (crc << 8) | static_cast<std::uint8_t>(png[pos + 8 + len + i]);
    EXPECT_EQ(crc, crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    types.push_back(body.substr(0, 4));
    if (types.back() == "tEXt") {
      EXPECT_EQ(body.substr(4), std::string("sarfa-run") + '\0' + R"({"schema":1})");
    }
    pos += 12 + len;
  }
  EXPECT_EQ(pos, png.size());
  ASSERT_GE(types.size(), 3u);
  EXPECT_EQ(types[0], "IHDR");
  EXPECT_EQ(types[1], "tEXt");
  EXPECT_EQ(types.back(), "IEND");

  // The image still decodes to the same pixels.
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  ASSERT_TRUE(png_image_begin_read_from_memory(&desc, png.data(), png.size()));
  desc.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(desc));
  ASSERT_TRUE(png_image_finish_read(&desc, nullptr, pixels.data(), 0, nullptr));
  EXPECT_EQ(pixels, img.data);

  EXPECT_EQ(encode_ppm(img, "meta").substr(0, 10), "P6\n# meta\n");
  EXPECT_EQ(heat_pgm(6, 4, std::vector<double>(24, 0.5), {}, "meta").substr(0, 10), "P5\n# meta\n");
  EXPECT_THROW(encode_ppm(img, "two\nlines"), ContractViolation);
  EXPECT_THROW(encode_png(img, {{"", "x"}}), ContractViolation);
}
