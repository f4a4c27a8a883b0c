#include <gtest/gtest.h>

#include <random>

#include "intentkit/text.hpp"

using namespace intentkit;

TEST(Tokenize, StripsTrailingPunctuation) {
  EXPECT_EQ(text::tokenize("thirteen flowers!"), (std::vector<std::string>{"thirteen", "flowers"}));
}

TEST(Tokenize, Lowercases) { EXPECT_EQ(text::tokenize("Yes"), (std::vector<std::string>{"yes"})); }

TEST(Tokenize, SplitsOnWhitespace) { EXPECT_EQ(text::tokenize("we need ten more to water").size(), 6u); }

TEST(Tokenize, KeepsInnerPunctuation) {
  EXPECT_EQ(text::tokenize("\"don't\" (stop)..."), (std::vector<std::string>{"don't", "stop"}));
}

TEST(Tokenize, PunctuationOnlyYieldsNothing) {
  EXPECT_TRUE(text::tokenize("?! ...").empty());
  EXPECT_TRUE(text::tokenize("").empty());
}

TEST(Tokenize, UnicodeLowercaseAndSpaces) {
  // U+00C9 (É) lowercases to U+00E9; U+3000 is an ideographic space.
  EXPECT_EQ(text::tokenize("\xC3\x89T\xC3\x89\xE3\x80\x80Ni\xC3\xB1o\xC2\xBF"),
            (std::vector<std::string>{"\xC3\xA9t\xC3\xA9", "ni\xC3\xB1o"}));
}

TEST(Tokenize, OffsetsAreCodePoints) {
  // "¡hola niño!" : '¡' is one code point (two bytes)
  const auto toks = text::tokenize_with_offsets("\xC2\xA1hola ni\xC3\xB1o!");
  ASSERT_EQ(toks.size(), 2u);
  EXPECT_EQ(toks[0].start, 1u);
  EXPECT_EQ(toks[0].end, 5u);
  EXPECT_EQ(toks[1].start, 6u);
  EXPECT_EQ(toks[1].end, 10u);
}

TEST(Tokenize, IdempotentOnJoinedOutput) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> pieces = {"Hi", "there!", "(ok)", "WHY?", "a-b", "...", "\xC3\x89t\xC3\xA9", "x"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) s += pieces[rng() % pieces.size()] + (rng() % 2 ? " " : "  ");
    const auto once = text::tokenize(s);
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    EXPECT_EQ(text::tokenize(joined), once) << s;
  }
}

TEST(Utf8, RejectsInvalidBytes) {
  EXPECT_THROW(text::decode_utf8("\xFF\xFE"), DataError);
  EXPECT_THROW(text::decode_utf8("abc\xC3"), DataError);
}

TEST(Utf8, RoundTrip) {
  const std::string s = "a\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\x80";
  EXPECT_EQ(text::code_point_length(s), 4u);
  EXPECT_EQ(text::encode_utf8(text::decode_utf8(s)), s);
}

TEST(NormalizeKey, CollapsesAndLowercases) {
  EXPECT_EQ(text::normalize_key("  Hello \t  WORLD  "), "hello world");
}

TEST(NormalizeKey, ComposesToNfc) {
  // "e" + combining acute -> precomposed é
  EXPECT_EQ(text::normalize_key("Caf" "e\xCC\x81"), "caf\xC3\xA9");
  EXPECT_EQ(text::normalize_key("CAF\xC3\x89"), "caf\xC3\xA9");
}

TEST(NormalizeKey, FullCaseMappingAndIdempotence) {
  // U+0130 (İ) lowercases to "i" + U+0307 under the root locale.
  EXPECT_EQ(text::normalize_key("\xC4\xB0"), "i\xCC\x87");
  for (const char* s : {"Mixed  Case\n", "\xC3\x85NGSTR\xC3\x96M", " a  b  c "}) {
    const auto once = text::normalize_key(s);
    EXPECT_EQ(text::normalize_key(once), once);
  }
}

TEST(WhitespaceWords, KeepsRawForm) {
  EXPECT_EQ(text::whitespace_words("Thirteen  flowers!"), (std::vector<std::string>{"Thirteen", "flowers!"}));
  EXPECT_TRUE(text::is_blank(" \t\n"));
  EXPECT_FALSE(text::is_blank(" x "));
}
