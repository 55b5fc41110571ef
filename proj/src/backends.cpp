#include "graphmpa/backends.hpp"

#include <cmath>

#include "graphmpa/docmodel.hpp"
#include "graphmpa/error.hpp"
#include "graphmpa/parallel.hpp"

namespace graphmpa {

double EmbeddingVector::norm() const {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
  if (raw.empty()) throw InputError("embedding has zero dimensions");
  double sum = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v)) throw InputError("embedding contains a non-finite value");
    sum += v * v;
  }
  if (sum == 0.0) throw InputError("cannot normalize a zero embedding");
  const double inv = 1.0 / std::sqrt(sum);
  for (double& v : raw) v *= inv;
  return EmbeddingVector{std::move(raw)};
}

void BackendConfig::validate() const {
  if (kind == BackendKind::http && endpoint_url.empty())
    throw InputError("http backend requires endpoint_url");
  if (timeout_ms <= 0) throw InputError("timeout_ms must be positive");
  if (max_concurrent == 0) throw InputError("max_concurrent must be positive");
  if (kind == BackendKind::mock && mock_dim == 0) throw InputError("mock_dim must be positive");
  if (retry_attempts < 1) throw InputError("retry_attempts must be >= 1");
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out(texts.size());
  bounded_parallel_for(texts.size(), max_concurrent(), [&](std::size_t i) {
    try {
      out[i] = embed(texts[i]);
    } catch (BackendError& e) {
      e.item = i;
      throw;
    } catch (const InputError& e) {
      throw InputError("item " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

std::vector<std::string> Summarizer::summarize_batch(
    const std::vector<std::vector<std::string>>& groups, std::size_t max_len) const {
  std::vector<std::string> out(groups.size());
  bounded_parallel_for(groups.size(), max_concurrent(), [&](std::size_t i) {
    try {
      out[i] = summarize(groups[i], max_len);
    } catch (BackendError& e) {
      e.item = i;
      throw;
    }
  });
  return out;
}

MockEmbedder::MockEmbedder(std::size_t dim, std::size_t max_concurrent)
    : dim_(dim), max_concurrent_(max_concurrent == 0 ? 1 : max_concurrent) {
  if (dim == 0) throw InputError("mock embedder dimension must be positive");
}

std::size_t MockEmbedder::bucket(std::string_view token, std::size_t dim) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h % dim);
}

EmbeddingVector MockEmbedder::embed(std::string_view text) const {
  const auto tokens = default_tokenizer().tokenize(text);
  if (tokens.empty()) throw InputError("embed: text has no tokens");
  std::vector<double> counts(dim_, 0.0);
  for (auto token : tokens) counts[bucket(token, dim_)] += 1.0;
  return EmbeddingVector::normalized(std::move(counts));
}

std::string MockSummarizer::summarize(std::span<const std::string> texts,
                                      std::size_t max_len) const {
  if (texts.empty()) throw InputError("summarize: no texts");
  if (max_len == 0) throw InputError("summarize: max_len must be positive");
  std::string joined;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i > 0) joined.push_back(' ');
    joined += texts[i];
  }
  return truncate_tokens(joined, max_len);
}

std::string MockReasoner::explain(const ReasoningRequest& request) const {
  if (request.context.empty())
    return "No passage is available, so the answer follows from the question itself: " +
           request.answer + ".";
  return "The most relevant passage states: \"" + truncate_tokens(request.context.front(), 16) +
         "\". Together with " + std::to_string(request.context.size() - 1) +
         " further passage(s) this supports the answer " + request.answer + ".";
}

std::string truncate_tokens(std::string_view text, std::size_t max_len, bool* truncated) {
  const auto tokens = default_tokenizer().tokenize(text);
  if (truncated) *truncated = tokens.size() > max_len;
  if (tokens.size() <= max_len) return std::string(text);
  return join_tokens(tokens, 0, max_len);
}

std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const auto key = tmpl.substr(open + 2, close - open - 2);
    bool found = false;
    for (const auto& [name, value] : values) {
      if (name == key) {
        out += value;
        found = true;
        break;
      }
    }
    if (!found) out.append(tmpl.substr(open, close + 2 - open));
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace graphmpa
