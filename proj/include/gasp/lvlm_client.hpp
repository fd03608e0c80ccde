#pragma once

#include "gasp/kb.hpp"
#include "gasp/prompt.hpp"

#include <json.hpp>

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gasp {

/// OpenAI-compatible chat endpoint, e.g. a vLLM server at
/// http://127.0.0.1:8000/v1 (requests go to <base_url>/chat/completions).
struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model_name;
  double timeout_s = 60.0;
  int max_retries = 3;
  std::size_t max_parallel = 4;
  double temperature = 0.0;
  int max_tokens = 16;
  double initial_backoff_s = 0.5;
  /// Environment variable holding the bearer token; unset or empty means no
  /// Authorization header.
  std::string api_key_env = "OPENAI_API_KEY";

  void validate() const;
};

/// Model answer. An empty `label` is a parse failure.
struct Verdict {
  std::optional<Label> label;
  std::string raw_text;
  double latency_s = 0.0;

  bool parse_failure() const noexcept { return !label.has_value(); }
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercases, takes the first run of ASCII letters and maps
/// real/authentic -> authentic, fake/manipulated/forged -> manipulated.
/// Anything else is a parse failure.
std::optional<Label> parse_verdict_label(std::string_view response);

/// Maps an image_ref to the URL sent to the model.
using ImageEncoder = std::function<std::string(const std::string& image_ref)>;

/// http(s):// and data: refs pass through; anything else is read as a local
/// file and embedded as a base64 data URL. Throws PromptError when the file
/// cannot be read.
std::string encode_image_data_url(const std::string& image_ref);

/// Chat-completion request body: one system message and one user message
/// holding the demonstrations then the query as interleaved text and
/// image_url parts.
nlohmann::json build_chat_request(const PromptBundle& prompt, const EndpointConfig& cfg,
                                  const ImageEncoder& encode_image = encode_image_data_url);

/// Text of choices[0].message.content (string or list of text parts).
/// Throws TransportError when the body is not a chat completion.
std::string extract_completion_text(const nlohmann::json& response);

class LvlmClient {
 public:
  explicit LvlmClient(EndpointConfig cfg, ImageEncoder encode_image = encode_image_data_url);

  const EndpointConfig& config() const noexcept { return cfg_; }

  /// Retries transport failures, 429 and 5xx with exponential backoff. The
  /// whole call is bounded by timeout_s * (max_retries + 1). Throws
  /// TransportError when every attempt fails.
  Verdict infer(const PromptBundle& prompt) const;

  /// Up to max_parallel requests in flight; results in request order.
  std::vector<Verdict> infer_batch(std::span<const PromptBundle> prompts) const;

 private:
  EndpointConfig cfg_;
  ImageEncoder encode_image_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // request path
};

/// Offline oracle: majority label of the demonstrations, ties go to the first
/// demonstration, zero demonstrations answer authentic.
Verdict mock_infer(const PromptBundle& prompt);

}  // namespace gasp
