#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace graphmpa {

using ChunkId = std::uint64_t;

enum class ChunkKind : std::uint8_t { leaf = 0, summary = 1 };

const char* to_string(ChunkKind kind);

/// A leaf or summary text unit; the payload of every graph node.
struct DocumentChunk {
  ChunkId id = 0;
  std::string text;
  std::size_t token_count = 0;
  ChunkKind kind = ChunkKind::leaf;
  std::size_t layer_index = 0;
  std::vector<ChunkId> source_ids;  // empty for leaves

  friend bool operator==(const DocumentChunk&, const DocumentChunk&) = default;
};

/// Parameters of a hierarchy build.
struct BuildConfig {
  std::size_t large = 2048;
  std::size_t small = 256;
  std::size_t n_layers = 2;
  double tau = 0.5;
  std::size_t k_edges = 10;
  std::size_t top_k_retrieval = 10;
  double resolution = 1.0;
  std::uint64_t seed = 0;

  /// Throws InputError when a field is out of range.
  void validate() const;

  friend bool operator==(const BuildConfig&, const BuildConfig&) = default;
};

/// Splits text into tokens. Token views point into the input.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string_view> tokenize(std::string_view text) const = 0;
  std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

/// Splits on Unicode whitespace (ASCII space/control whitespace plus the
/// Zs/Zl/Zp code points encoded in UTF-8).
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<std::string_view> tokenize(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

std::size_t count_tokens(std::string_view text);
std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer);

/// Joins tokens with a single space.
std::string join_tokens(const std::vector<std::string_view>& tokens, std::size_t begin,
                        std::size_t end);

/// Greedy left-to-right split into chunks of at most `target_len` tokens.
///
/// When more text remains after a window, the break moves back to the last
/// sentence-final token inside the final 20% of the window if there is one.
/// Chunk text is the window's tokens joined by single spaces. Chunks get
/// consecutive ids starting at `first_id` and are leaves at layer 0.
std::vector<DocumentChunk> split_text(std::string_view text, std::size_t target_len,
                                      ChunkId first_id = 0);
std::vector<DocumentChunk> split_text(std::string_view text, std::size_t target_len,
                                      ChunkId first_id, const Tokenizer& tokenizer);

}  // namespace graphmpa
