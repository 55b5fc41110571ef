#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "graphmpa/docmodel.hpp"
#include "graphmpa/error.hpp"
#include "graphmpa/random.hpp"
#include "oracles.hpp"

using namespace graphmpa;

namespace {

std::vector<std::string> texts(const std::vector<DocumentChunk>& chunks) {
  std::vector<std::string> out;
  for (const auto& c : chunks) out.push_back(c.text);
  return out;
}

std::string joined(const std::vector<DocumentChunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) out += c.text + " ";
  return oracle::normalize_ws(out);
}

std::string random_text(Rng& rng, std::size_t n) {
  static const std::vector<std::string> vocab{"alpha", "beta", "gamma.", "delta", "eps!",
                                              "zeta",  "eta?", "theta",  "iota",  "kappa"};
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    s += vocab[rng.below(vocab.size())];
    s += rng.below(7) == 0 ? "\n\t " : " ";
  }
  return s;
}

}  // namespace

TEST_CASE("count_tokens") {
  CHECK(count_tokens("") == 0);
  CHECK(count_tokens("   \n\t") == 0);
  CHECK(count_tokens("hello world") == 2);

  std::string words;
  for (int i = 0; i < 500; ++i) words += "w" + std::to_string(i) + " ";
  CHECK(count_tokens(words) == oracle::words(words).size());
  CHECK(count_tokens(words) == 500);
}

TEST_CASE("unicode whitespace separates tokens") {
  // no-break space, ideographic space, line separator
  CHECK(count_tokens("a\xC2\xA0" "b\xE3\x80\x80" "c\xE2\x80\xA8" "d") == 4);
  // non-whitespace multibyte characters stay inside tokens
  CHECK(count_tokens("caf\xC3\xA9 na\xC3\xAFve") == 2);
}

TEST_CASE("split_text small examples") {
  CHECK(texts(split_text("a b c d", 2)) == std::vector<std::string>{"a b", "c d"});
  CHECK(texts(split_text("a b c", 5)) == std::vector<std::string>{"a b c"});
  CHECK(split_text("", 3).empty());
  CHECK(split_text("  \n ", 3).empty());
}

TEST_CASE("split_text 1000 tokens at 358") {
  std::string text;
  for (int i = 0; i < 1000; ++i) text += "tok" + std::to_string(i) + " ";
  const auto chunks = split_text(text, 358);
  REQUIRE(chunks.size() == 3);
  for (const auto& c : chunks) CHECK(c.token_count <= 358);
  CHECK(joined(chunks) == oracle::normalize_ws(text));
}

TEST_CASE("split_text prefers sentence ends near the window end") {
  // window of 10: a sentence ends at token 9 (inside the last 20%)
  const auto chunks = split_text("a b c d e f g h i. j k l", 10);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].text == "a b c d e f g h i.");
  CHECK(chunks[1].text == "j k l");
  // a sentence end outside the last 20% is ignored
  const auto far = split_text("a b. c d e f g h i j k l", 10);
  CHECK(far[0].token_count == 10);
}

TEST_CASE("split_text properties on random text") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto text = random_text(rng, rng.below(300));
    const std::size_t target = 1 + rng.below(40);
    const ChunkId first = rng.below(1000);
    const auto chunks = split_text(text, target, first);
    std::size_t total = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& c = chunks[i];
      CHECK(c.id == first + i);
      CHECK(c.token_count >= 1);
      CHECK(c.token_count <= target);
      CHECK(c.token_count == count_tokens(c.text));
      CHECK(c.kind == ChunkKind::leaf);
      CHECK(c.source_ids.empty());
      CHECK(c.layer_index == 0);
      total += c.token_count;
    }
    CHECK(total == oracle::words(text).size());
    CHECK(joined(chunks) == oracle::normalize_ws(text));
    CHECK(split_text(text, target, first) == chunks);
    // re-splitting each chunk is idempotent
    for (const auto& c : chunks) {
      const auto again = split_text(c.text, target, c.id);
      REQUIRE(again.size() == 1);
      CHECK(again[0] == c);
    }
  }
}

TEST_CASE("split_text rejects a zero target") { CHECK_THROWS_AS(split_text("a", 0), InputError); }

TEST_CASE("BuildConfig validation") {
  BuildConfig c;
  CHECK(c.tau == 0.5);
  CHECK(c.n_layers == 2);
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.small = bad.large;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.tau = 1.5;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.resolution = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.k_edges = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}
