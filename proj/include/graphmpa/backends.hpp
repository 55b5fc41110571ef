#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace graphmpa {

/// Unit-norm dense vector. Backends normalize before returning one.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  double norm() const;

  /// L2-normalizes `raw`. Throws InputError for an empty or zero vector.
  static EmbeddingVector normalized(std::vector<double> raw);

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

enum class BackendKind { mock, http };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string endpoint_url;  // OpenAI-compatible base, e.g. http://localhost:8000/v1
  std::string model_name;
  std::string api_key_env;  // name of the variable holding the key
  int timeout_ms = 60000;
  std::size_t max_concurrent = 4;
  std::size_t mock_dim = 64;
  int retry_attempts = 3;
  int retry_base_ms = 250;

  void validate() const;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t max_concurrent() const { return 1; }

  /// Element i equals embed(texts[i]). Runs up to max_concurrent() calls at
  /// once; a failing item is reported with its index (BackendError::item).
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const;
};

class Summarizer {
 public:
  virtual ~Summarizer() = default;
  /// Result has at most max_len tokens.
  virtual std::string summarize(std::span<const std::string> texts, std::size_t max_len) const = 0;
  virtual std::size_t max_concurrent() const { return 1; }

  std::vector<std::string> summarize_batch(const std::vector<std::vector<std::string>>& groups,
                                           std::size_t max_len) const;
};

struct ReasoningRequest {
  std::string question;
  std::vector<std::string> context;
  std::string answer;
};

/// Produces a chain-of-thought explanation that leads to a known answer.
class ReasoningBackend {
 public:
  virtual ~ReasoningBackend() = default;
  virtual std::string name() const = 0;
  virtual std::string explain(const ReasoningRequest& request) const = 0;
};

/// Hashed bag-of-words: each token adds one to bucket fnv1a(token) % dim, then
/// the vector is L2-normalized.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim = 64, std::size_t max_concurrent = 1);

  EmbeddingVector embed(std::string_view text) const override;
  std::size_t max_concurrent() const override { return max_concurrent_; }
  std::size_t dim() const noexcept { return dim_; }

  static std::size_t bucket(std::string_view token, std::size_t dim);

 private:
  std::size_t dim_;
  std::size_t max_concurrent_;
};

/// Joins texts with a space and keeps the first max_len tokens.
class MockSummarizer final : public Summarizer {
 public:
  std::string summarize(std::span<const std::string> texts, std::size_t max_len) const override;
};

/// Deterministic stand-in for a reasoning LLM. Quotes the head of the most
/// relevant context passage and states the answer.
class MockReasoner final : public ReasoningBackend {
 public:
  explicit MockReasoner(std::string name = "mock") : name_(std::move(name)) {}
  std::string name() const override { return name_; }
  std::string explain(const ReasoningRequest& request) const override;

 private:
  std::string name_;
};

// ---------------------------------------------------------------------------
// HTTP

struct HttpRequest {
  std::string url;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
  int timeout_ms = 0;
};

struct HttpResponse {
  int status = 0;  // 0: transport failure, see error
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const HttpRequest& request) const = 0;
};

/// cpp-httplib backed transport (http and https).
std::shared_ptr<HttpTransport> make_default_transport();

using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// JSON-over-HTTP client for an OpenAI-compatible server. Enforces the
/// in-flight limit and the retry policy (transport errors and 5xx only,
/// exponential backoff from retry_base_ms).
class OpenAiClient {
 public:
  OpenAiClient(BackendConfig config, std::shared_ptr<HttpTransport> transport,
               SleepFn sleep = {});
  ~OpenAiClient();
  OpenAiClient(OpenAiClient&&) noexcept;
  OpenAiClient& operator=(OpenAiClient&&) noexcept;

  /// POSTs `body_json` to endpoint_url + path and returns the response body.
  std::string post(std::string_view path, const std::string& body_json) const;

  /// Embeddings endpoint for a single input.
  std::vector<double> embedding(std::string_view text) const;
  /// Chat-completions endpoint with one user message.
  std::string chat(const std::string& prompt, std::size_t max_tokens) const;

  const BackendConfig& config() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(OpenAiClient client) : client_(std::move(client)) {}
  EmbeddingVector embed(std::string_view text) const override;
  std::size_t max_concurrent() const override { return client_.config().max_concurrent; }

 private:
  OpenAiClient client_;
};

class HttpSummarizer final : public Summarizer {
 public:
  HttpSummarizer(OpenAiClient client, std::string prompt_template)
      : client_(std::move(client)), template_(std::move(prompt_template)) {}
  std::string summarize(std::span<const std::string> texts, std::size_t max_len) const override;
  std::size_t max_concurrent() const override { return client_.config().max_concurrent; }

 private:
  OpenAiClient client_;
  std::string template_;
};

class HttpReasoner final : public ReasoningBackend {
 public:
  HttpReasoner(OpenAiClient client, std::string prompt_template, std::size_t max_tokens = 512)
      : client_(std::move(client)), template_(std::move(prompt_template)), max_tokens_(max_tokens) {}
  std::string name() const override { return client_.config().model_name; }
  std::string explain(const ReasoningRequest& request) const override;

 private:
  OpenAiClient client_;
  std::string template_;
  std::size_t max_tokens_;
};

/// Keeps the first max_len tokens; `truncated` is set when anything was cut.
std::string truncate_tokens(std::string_view text, std::size_t max_len, bool* truncated = nullptr);

/// Replaces every {{name}} with its value; unknown placeholders are left as is.
std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& values);

}  // namespace graphmpa
