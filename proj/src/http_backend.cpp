#include <cstdlib>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "graphmpa/backends.hpp"
#include "graphmpa/error.hpp"

namespace graphmpa {

namespace {

using nlohmann::json;

// Splits "scheme://host[:port]/prefix" into ("scheme://host[:port]", "/prefix").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InputError("endpoint url lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) const override {
    const auto [base, path] = split_url(request.url);
    httplib::Client client(base);
    const auto timeout = std::chrono::milliseconds(request.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto result = client.Post(path, headers, request.body, "application/json");
    if (!result) return HttpResponse{0, {}, httplib::to_string(result.error())};
    return HttpResponse{result->status, result->body, {}};
  }
};

std::string redact_header(const std::string& name, const std::string& value) {
  if (name == "Authorization") return "Bearer ***";
  return value;
}

}  // namespace

std::shared_ptr<HttpTransport> make_default_transport() {
  return std::make_shared<HttplibTransport>();
}

struct OpenAiClient::State {
  BackendConfig config;
  std::shared_ptr<HttpTransport> transport;
  SleepFn sleep;
  std::counting_semaphore<> in_flight;

  State(BackendConfig c, std::shared_ptr<HttpTransport> t, SleepFn s)
      : config(std::move(c)),
        transport(std::move(t)),
        sleep(std::move(s)),
        in_flight(static_cast<std::ptrdiff_t>(config.max_concurrent)) {}
};

OpenAiClient::OpenAiClient(BackendConfig config, std::shared_ptr<HttpTransport> transport,
                           SleepFn sleep) {
  config.validate();
  if (!transport) throw InputError("OpenAiClient needs a transport");
  if (!sleep) sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  state_ = std::make_unique<State>(std::move(config), std::move(transport), std::move(sleep));
}

OpenAiClient::~OpenAiClient() = default;
OpenAiClient::OpenAiClient(OpenAiClient&&) noexcept = default;
OpenAiClient& OpenAiClient::operator=(OpenAiClient&&) noexcept = default;

const BackendConfig& OpenAiClient::config() const { return state_->config; }

std::string OpenAiClient::post(std::string_view path, const std::string& body_json) const {
  const auto& cfg = state_->config;
  std::string base = cfg.endpoint_url;
  while (!base.empty() && base.back() == '/') base.pop_back();

  HttpRequest request;
  request.url = base + std::string(path);
  request.body = body_json;
  request.timeout_ms = cfg.timeout_ms;
  if (!cfg.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
      request.headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  if (spdlog::should_log(spdlog::level::debug)) {
    std::string hdrs;
    for (const auto& [k, v] : request.headers) hdrs += k + ": " + redact_header(k, v) + "; ";
    spdlog::debug("POST {} headers=[{}] body={}", request.url, hdrs, request.body);
  }

  HttpResponse response;
  for (int attempt = 1;; ++attempt) {
    state_->in_flight.acquire();
    try {
      response = state_->transport->post(request);
    } catch (...) {
      state_->in_flight.release();
      throw;
    }
    state_->in_flight.release();
    spdlog::debug("response {} status={} body={}", request.url, response.status, response.body);

    const bool retryable = response.status == 0 || response.status >= 500;
    if (response.status >= 200 && response.status < 300) return response.body;
    const std::string what = response.status == 0
                                 ? "transport failure: " + response.error
                                 : "HTTP " + std::to_string(response.status) + " from " + request.url;
    if (!retryable) throw BackendError(what, response.status, false);
    if (attempt >= cfg.retry_attempts) throw BackendError(what, response.status, true);
    const auto delay = std::chrono::milliseconds(cfg.retry_base_ms) * (1 << (attempt - 1));
    spdlog::warn("{}; retrying in {} ms (attempt {}/{})", what, delay.count(), attempt,
                 cfg.retry_attempts);
    state_->sleep(delay);
  }
}

std::vector<double> OpenAiClient::embedding(std::string_view text) const {
  const json body = {{"model", state_->config.model_name}, {"input", std::string(text)}};
  const auto raw = post("/embeddings", body.dump());
  try {
    const auto parsed = json::parse(raw);
    return parsed.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed embeddings response: ") + e.what(), 200, false);
  }
}

std::string OpenAiClient::chat(const std::string& prompt, std::size_t max_tokens) const {
  const json body = {{"model", state_->config.model_name},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                     {"max_tokens", max_tokens},
                     {"temperature", 0}};
  const auto raw = post("/chat/completions", body.dump());
  try {
    const auto parsed = json::parse(raw);
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed chat response: ") + e.what(), 200, false);
  }
}

EmbeddingVector HttpEmbedder::embed(std::string_view text) const {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw InputError("embed: empty text");
  return EmbeddingVector::normalized(client_.embedding(text));
}

std::string HttpSummarizer::summarize(std::span<const std::string> texts,
                                      std::size_t max_len) const {
  if (texts.empty()) throw InputError("summarize: no texts");
  std::string joined;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i > 0) joined += "\n\n";
    joined += texts[i];
  }
  const auto prompt =
      render_template(template_, {{"texts", joined}, {"max_len", std::to_string(max_len)}});
  // Model tokens are usually shorter than whitespace tokens; leave headroom and
  // enforce the budget after the fact.
  const auto reply = client_.chat(prompt, max_len * 2);
  bool truncated = false;
  auto summary = truncate_tokens(reply, max_len, &truncated);
  if (truncated)
    spdlog::warn("summary from {} exceeded {} tokens; truncated", client_.config().model_name,
                 max_len);
  return summary;
}

std::string HttpReasoner::explain(const ReasoningRequest& request) const {
  std::string context;
  for (std::size_t i = 0; i < request.context.size(); ++i)
    context += "[" + std::to_string(i + 1) + "] " + request.context[i] + "\n";
  const auto prompt = render_template(
      template_,
      {{"question", request.question}, {"context", context}, {"answer", request.answer}});
  return client_.chat(prompt, max_tokens_);
}

}  // namespace graphmpa
