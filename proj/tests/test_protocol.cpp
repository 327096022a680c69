#include <gtest/gtest.h>

#include <random>

#include "sarfa/base64.hpp"
#include "sarfa/external_agent.hpp"
#include "sarfa/uci.hpp"

using namespace sarfa;
using namespace sarfa::uci;

TEST(Base64, KnownVectors) {
  EXPECT_EQ(base64::encode(""), "");
  EXPECT_EQ(base64::encode("f"), "Zg==");
  EXPECT_EQ(base64::encode("fo"), "Zm8=");
  EXPECT_EQ(base64::encode("foo"), "Zm9v");
  EXPECT_EQ(base64::encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(base64::decode("Zm8="), "fo");
  EXPECT_EQ(base64::decode("Zg=="), "f");
  EXPECT_THROW(base64::decode("Zm8"), InputError);
  EXPECT_THROW(base64::decode("Z!8="), InputError);
}

TEST(Base64, RoundTripRandomBytes) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 1000; ++i) {
    std::string s(rng() % 300, '\0');
    for (auto& c : s) c = static_cast<char>(rng() & 0xff);
    ASSERT_EQ(base64::decode(base64::encode(s)), s);
  }
}

TEST(ScoreToQ, Examples) {
  const ScoreMapping m;
  EXPECT_EQ(score_to_q({"e2e4", Centipawns{0}}, m), 0.0);
  EXPECT_DOUBLE_EQ(score_to_q({"e2e4", Centipawns{150}}, m), 1.5);
  EXPECT_DOUBLE_EQ(score_to_q({"e2e4", Centipawns{-150}}, m), -1.5);
  EXPECT_GT(score_to_q({"a", MateIn{2}}, m), score_to_q({"a", MateIn{5}}, m));
  EXPECT_GT(score_to_q({"a", MateIn{5}}, m), score_to_q({"a", Centipawns{100000}}, m));
  EXPECT_LT(score_to_q({"a", MateIn{-2}}, m), score_to_q({"a", MateIn{-5}}, m));
  EXPECT_LT(score_to_q({"a", MateIn{-5}}, m), score_to_q({"a", Centipawns{-100000}}, m));
  EXPECT_DOUBLE_EQ(score_to_q({"a", MateIn{1}}, m), m.q_cap);
  EXPECT_THROW(score_to_q({"a", MateIn{0}}, m), ContractViolation);
}

namespace {

// Total order over scores from the mover's view: mates-for (shorter first),
// then centipawns, then mates-against (longer first).
double rank_key(const EngineScore& s) {
  if (const auto* cp = std::get_if<Centipawns>(&s.kind)) return cp->value;
  const int n = std::get<MateIn>(s.kind).moves;
  return n > 0 ? 1e9 - n : -1e9 - n;
}

EngineScore random_score(std::mt19937_64& rng) {
  if (rng() % 3 == 0) {
    int n = 1 + static_cast<int>(rng() % 60);
    return {"m", MateIn{rng() % 2 ? n : -n}};
  }
  return {"m", Centipawns{static_cast<int>(rng() % 4001) - 2000}};
}

}  // namespace

TEST(ScoreToQ, MonotoneAndBounded) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> cap(1, 100), scale(0.1, 3);
  for (int i = 0; i < 5000; ++i) {
    ScoreMapping m{scale(rng), cap(rng), cap(rng)};
    // Monotone over the unsaturated centipawn range.
    m.q_scale = std::min(m.q_scale, m.mate_floor() / 20.5);
    const auto a = random_score(rng), b = random_score(rng);
    const double qa = score_to_q(a, m), qb = score_to_q(b, m);
    ASSERT_LE(std::abs(qa), m.q_cap);
    if (rank_key(a) > rank_key(b)) {
      ASSERT_GT(qa, qb);
    }
    if (rank_key(a) == rank_key(b)) {
      ASSERT_EQ(qa, qb);
    }
  }
}

TEST(UciParse, InfoLines) {
  auto l = parse_info_line("info depth 12 seldepth 18 multipv 2 score cp -35 nodes 1000 nps 5 pv e7e5 g1f3");
  ASSERT_TRUE(l);
  EXPECT_EQ(l->depth, 12);
  EXPECT_EQ(l->multipv, 2);
  EXPECT_EQ(l->score.move, "e7e5");
  EXPECT_EQ(std::get<Centipawns>(l->score.kind).value, -35);
  EXPECT_FALSE(l->bound);

  l = parse_info_line("info depth 5 score mate -3 upperbound pv h2h4");
  ASSERT_TRUE(l);
  EXPECT_EQ(std::get<MateIn>(l->score.kind).moves, -3);
  EXPECT_TRUE(l->bound);
  EXPECT_EQ(l->multipv, 1);

  EXPECT_FALSE(parse_info_line("info depth 3 currmove e2e4 currmovenumber 1"));
  EXPECT_FALSE(parse_info_line("info string NNUE evaluation using nn.nnue"));
  EXPECT_FALSE(parse_info_line("bestmove e2e4"));
  EXPECT_THROW(parse_info_line("info depth 3 score cp x12 pv e2e4"), ProtocolError);
  EXPECT_THROW(parse_info_line("info depth 3 score wdl 1 2 3 pv e2e4"), ProtocolError);
  EXPECT_THROW(parse_info_line("info depth 3 score cp 1 pv"), ProtocolError);
}

TEST(UciParse, CollectKeepsLatestPerSlot) {
  std::vector<InfoLine> lines;
  for (const char* s : {"info depth 1 multipv 1 score cp 10 pv a2a3", "info depth 1 multipv 2 score cp 5 pv b2b3",
                        "info depth 2 multipv 1 score cp 30 pv b2b3", "info depth 2 multipv 2 score cp 20 pv a2a3",
                        "info depth 3 multipv 1 score cp 99 lowerbound pv a2a3"})
    lines.push_back(*parse_info_line(s));
  const auto scores = collect_scores(lines);
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[0].move, "b2b3");
  EXPECT_EQ(std::get<Centipawns>(scores[0].kind).value, 30);
  EXPECT_EQ(scores[1].move, "a2a3");
  EXPECT_EQ(std::get<Centipawns>(scores[1].kind).value, 20);
}

TEST(UciParse, GoCommand) {
  EXPECT_EQ(go_command(Depth{12}), "go depth 12");
  EXPECT_EQ(go_command(MoveTime{250}), "go movetime 250");
}

TEST(ExternalProtocol, Examples) {
  auto r = agent::parse_reply("QVALUES up:1.0 down:0.5");
  const auto& q = std::get<QProfile>(r);
  EXPECT_EQ(q, QProfile("", {{"up", 1.0}, {"down", 0.5}}));
  EXPECT_THROW(agent::parse_reply("QVALUES"), ProtocolError);
  EXPECT_THROW(agent::parse_reply("QVALUES up:1 up:2"), ProtocolError);
  EXPECT_THROW(agent::parse_reply("QVALUES up=1"), ProtocolError);
  EXPECT_THROW(agent::parse_reply("QVALUES up:nan"), ProtocolError);
  EXPECT_THROW(agent::parse_reply("QVALUES up:1x"), ProtocolError);
  EXPECT_THROW(agent::parse_reply("hello"), ProtocolError);
  EXPECT_EQ(std::get<agent::ErrorReply>(agent::parse_reply("ERR out of memory")).message, "out of memory");
  // Actions may contain ':'; the value follows the last one.
  EXPECT_EQ(*std::get<QProfile>(agent::parse_reply("QVALUES a:b:2")).q("a:b"), 2.0);
  EXPECT_EQ(agent::parse_eval_request("EVAL Zm9v"), "foo");
  EXPECT_THROW(agent::parse_eval_request("EVIL Zm9v"), ProtocolError);
}

TEST(ExternalProtocol, RoundTripIsIdentity) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    std::vector<QEntry> e;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) {
      double v = u(rng);
      if (k % 3 == 1) v = std::ldexp(v, -static_cast<int>(rng() % 60));
      e.push_back({"act" + std::to_string(k) + (k % 2 ? ":x" : ""), v});
    }
    const QProfile q("s", e);
    ASSERT_EQ(std::get<QProfile>(agent::parse_reply(agent::format_qvalues_reply(q), "s")), q);

    std::string bytes(rng() % 200, '\0');
    for (auto& c : bytes) c = static_cast<char>(rng() & 0xff);
    ASSERT_EQ(agent::parse_eval_request(agent::format_eval_request(bytes)), bytes);

    const std::string msg = "failure " + std::to_string(rng());
    ASSERT_EQ(std::get<agent::ErrorReply>(agent::parse_reply(agent::format_error_reply(msg))).message, msg);
  }
}
