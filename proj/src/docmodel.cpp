#include "graphmpa/docmodel.hpp"

#include <algorithm>

#include "graphmpa/error.hpp"

namespace graphmpa {

namespace {

// Byte length of the White_Space code point starting at text[pos], or 0.
std::size_t whitespace_width(std::string_view text, std::size_t pos) {
  const auto byte = [&](std::size_t k) -> unsigned {
    return pos + k < text.size() ? static_cast<unsigned char>(text[pos + k]) : 0u;
  };
  const unsigned b0 = byte(0);
  if (b0 == 0x20 || (b0 >= 0x09 && b0 <= 0x0D)) return 1;
  if (b0 == 0xC2) {
    const unsigned b1 = byte(1);
    return (b1 == 0x85 || b1 == 0xA0) ? 2 : 0;
  }
  if (b0 == 0xE1) return (byte(1) == 0x9A && byte(2) == 0x80) ? 3 : 0;
  if (b0 == 0xE2) {
    const unsigned b1 = byte(1), b2 = byte(2);
    if (b1 == 0x80 && ((b2 >= 0x80 && b2 <= 0x8A) || b2 == 0xA8 || b2 == 0xA9 || b2 == 0xAF))
      return 3;
    if (b1 == 0x81 && b2 == 0x9F) return 3;
    return 0;
  }
  if (b0 == 0xE3) return (byte(1) == 0x80 && byte(2) == 0x80) ? 3 : 0;
  return 0;
}

bool ends_sentence(std::string_view token) {
  while (!token.empty()) {
    const char c = token.back();
    if (c == '"' || c == '\'' || c == ')' || c == ']' || c == '}') {
      token.remove_suffix(1);
      continue;
    }
    return c == '.' || c == '!' || c == '?';
  }
  return false;
}

}  // namespace

const char* to_string(ChunkKind kind) {
  return kind == ChunkKind::leaf ? "leaf" : "summary";
}

void BuildConfig::validate() const {
  if (large == 0 || small == 0) throw InputError("large and small must be positive");
  if (small >= large) throw InputError("small must be less than large");
  if (n_layers == 0) throw InputError("n_layers must be positive");
  if (!(tau >= 0.0 && tau <= 1.0)) throw InputError("tau must lie in [0, 1]");
  if (k_edges == 0) throw InputError("k_edges must be positive");
  if (top_k_retrieval == 0) throw InputError("top_k_retrieval must be positive");
  if (!(resolution > 0.0)) throw InputError("resolution must be positive");
}

std::vector<std::string_view> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  std::size_t start = std::string_view::npos;
  while (pos < text.size()) {
    const std::size_t ws = whitespace_width(text, pos);
    if (ws > 0) {
      if (start != std::string_view::npos) {
        tokens.push_back(text.substr(start, pos - start));
        start = std::string_view::npos;
      }
      pos += ws;
    } else {
      if (start == std::string_view::npos) start = pos;
      ++pos;
    }
  }
  if (start != std::string_view::npos) tokens.push_back(text.substr(start));
  return tokens;
}

const Tokenizer& default_tokenizer() {
  static const WhitespaceTokenizer tokenizer;
  return tokenizer;
}

std::size_t count_tokens(std::string_view text) { return default_tokenizer().count(text); }

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer) {
  return tokenizer.count(text);
}

std::string join_tokens(const std::vector<std::string_view>& tokens, std::size_t begin,
                        std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out.append(tokens[i]);
  }
  return out;
}

std::vector<DocumentChunk> split_text(std::string_view text, std::size_t target_len,
                                      ChunkId first_id) {
  return split_text(text, target_len, first_id, default_tokenizer());
}

std::vector<DocumentChunk> split_text(std::string_view text, std::size_t target_len,
                                      ChunkId first_id, const Tokenizer& tokenizer) {
  if (target_len == 0) throw InputError("split_text: target_len must be >= 1");
  const auto tokens = tokenizer.tokenize(text);
  // Breaks are only moved back into this many trailing window positions.
  const std::size_t tail = (target_len + 4) / 5;

  std::vector<DocumentChunk> chunks;
  std::size_t begin = 0;
  while (begin < tokens.size()) {
    std::size_t end = std::min(begin + target_len, tokens.size());
    if (end < tokens.size()) {
      const std::size_t lowest = begin + target_len - tail;
      for (std::size_t j = end; j-- > lowest;) {
        if (ends_sentence(tokens[j])) {
          end = j + 1;
          break;
        }
      }
    }
    DocumentChunk chunk;
    chunk.id = first_id + chunks.size();
    chunk.text = join_tokens(tokens, begin, end);
    chunk.token_count = tokenizer.count(chunk.text);
    chunks.push_back(std::move(chunk));
    begin = end;
  }
  return chunks;
}

}  // namespace graphmpa
