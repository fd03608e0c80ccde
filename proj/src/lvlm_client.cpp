#include "gasp/lvlm_client.hpp"

#include "gasp/parallel.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace gasp {

namespace {

using Clock = std::chrono::steady_clock;

std::string mime_for(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".bmp") return "image/bmp";
  return "application/octet-stream";
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

nlohmann::json user_parts(const PromptBlock& block, const ImageEncoder& encode_image) {
  auto parts = nlohmann::json::array();
  for (const auto& p : block.parts) {
    if (p.kind == ContentPart::Kind::image) {
      parts.push_back({{"type", "image_url"}, {"image_url", {{"url", encode_image(p.value)}}}});
    } else {
      parts.push_back({{"type", "text"}, {"text", p.value}});
    }
  }
  return parts;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

void EndpointConfig::validate() const {
  if (!(timeout_s > 0.0)) throw std::invalid_argument("timeout must be > 0");
  if (max_parallel < 1) throw std::invalid_argument("max_parallel must be >= 1");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  if (base_url.empty()) throw std::invalid_argument("base_url is empty");
}

std::optional<Label> parse_verdict_label(std::string_view response) {
  std::size_t i = 0;
  auto alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
  while (i < response.size() && !alpha(response[i])) ++i;
  std::string token;
  while (i < response.size() && alpha(response[i])) {
    token += static_cast<char>(std::tolower(static_cast<unsigned char>(response[i])));
    ++i;
  }
  if (token == "real" || token == "authentic") return Label::authentic;
  if (token == "fake" || token == "manipulated" || token == "forged") return Label::manipulated;
  return std::nullopt;
}

std::string encode_image_data_url(const std::string& image_ref) {
  if (starts_with(image_ref, "http://") || starts_with(image_ref, "https://") || starts_with(image_ref, "data:")) {
    return image_ref;
  }
  std::ifstream in(image_ref, std::ios::binary);
  if (!in) throw PromptError("cannot read image " + image_ref);
  std::ostringstream buf;
  buf << in.rdbuf();
  return "data:" + mime_for(image_ref) + ";base64," + httplib::detail::base64_encode(buf.str());
}

nlohmann::json build_chat_request(const PromptBundle& prompt, const EndpointConfig& cfg,
                                  const ImageEncoder& encode_image) {
  auto content = nlohmann::json::array();
  for (const auto& demo : prompt.demonstrations)
    for (auto& part : user_parts(demo, encode_image)) content.push_back(std::move(part));
  for (auto& part : user_parts(prompt.query, encode_image)) content.push_back(std::move(part));

  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", prompt.system_text}});
  messages.push_back({{"role", "user"}, {"content", std::move(content)}});
  return {{"model", cfg.model_name},
          {"messages", std::move(messages)},
          {"temperature", cfg.temperature},
          {"max_tokens", cfg.max_tokens},
          {"stream", false}};
}

std::string extract_completion_text(const nlohmann::json& response) {
  const auto choices = response.find("choices");
  if (choices == response.end() || !choices->is_array() || choices->empty()) {
    throw TransportError("response has no choices");
  }
  const auto& message = (*choices)[0].value("message", nlohmann::json::object());
  const auto content = message.find("content");
  if (content == message.end()) throw TransportError("response message has no content");
  if (content->is_string()) return content->get<std::string>();
  if (content->is_null()) return {};
  if (content->is_array()) {
    std::string text;
    for (const auto& part : *content)
      if (part.value("type", "") == "text") text += part.value("text", "");
    return text;
  }
  throw TransportError("unsupported message content type");
}

LvlmClient::LvlmClient(EndpointConfig cfg, ImageEncoder encode_image)
    : cfg_(std::move(cfg)), encode_image_(std::move(encode_image)) {
  cfg_.validate();
  std::string url = cfg_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("base_url needs a scheme: " + cfg_.base_url);
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_ = (path_start == std::string::npos ? std::string() : url.substr(path_start)) + "/chat/completions";
}

Verdict LvlmClient::infer(const PromptBundle& prompt) const {
  const std::string body = build_chat_request(prompt, cfg_, encode_image_).dump();
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto start = Clock::now();
  const auto budget = std::chrono::duration<double>(cfg_.timeout_s * (cfg_.max_retries + 1));
  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(budget);
  auto backoff = std::chrono::duration<double>(cfg_.initial_backoff_s);
  std::string last_error = "no attempt made";

  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    const auto remaining = std::chrono::duration<double>(deadline - Clock::now());
    if (remaining.count() <= 0.0) break;
    const auto attempt_timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::min(remaining, std::chrono::duration<double>(cfg_.timeout_s)));

    httplib::Client client(origin_);
    client.set_connection_timeout(attempt_timeout);
    client.set_read_timeout(attempt_timeout);
    client.set_write_timeout(attempt_timeout);

    auto res = client.Post(path_, headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw TransportError(std::string("invalid JSON from endpoint: ") + e.what());
      }
      Verdict v;
      v.raw_text = extract_completion_text(parsed);
      v.label = parse_verdict_label(v.raw_text);
      v.latency_s = std::chrono::duration<double>(Clock::now() - start).count();
      return v;
    }
    if (res) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      if (!retryable_status(res->status)) throw TransportError(last_error);
    } else {
      last_error = httplib::to_string(res.error());
    }

    if (attempt == cfg_.max_retries) break;
    const auto sleep_for = std::min(backoff, std::chrono::duration<double>(deadline - Clock::now()));
    if (sleep_for.count() > 0.0) std::this_thread::sleep_for(sleep_for);
    backoff *= 2.0;
  }
  throw TransportError("request to " + origin_ + path_ + " failed: " + last_error);
}

std::vector<Verdict> LvlmClient::infer_batch(std::span<const PromptBundle> prompts) const {
  std::vector<Verdict> out(prompts.size());
  parallel_for(prompts.size(), cfg_.max_parallel, [&](std::size_t i) { out[i] = infer(prompts[i]); });
  return out;
}

Verdict mock_infer(const PromptBundle& prompt) {
  Verdict v;
  std::size_t fake = 0, real = 0;
  for (const auto& d : prompt.demonstrations) (d.label_word == label_word(Label::manipulated) ? fake : real)++;
  Label label = Label::authentic;
  if (fake != real) {
    label = fake > real ? Label::manipulated : Label::authentic;
  } else if (!prompt.demonstrations.empty()) {
    label = prompt.demonstrations.front().label_word == label_word(Label::manipulated) ? Label::manipulated
                                                                                       : Label::authentic;
  }
  v.label = label;
  v.raw_text = std::string(label_word(label));
  return v;
}

}  // namespace gasp
