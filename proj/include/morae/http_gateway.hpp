#pragma once

// Chat-completions client over HTTP(S). Speaks the common
// `{"model","messages":[{"role","content"}],"temperature"}` request shape and
// reads `choices[0].message.content` back.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"

#include "morae/gateway.hpp"

namespace morae {

struct HttpReply {
  int status = 0;
  std::string body;
  // Non-empty when no HTTP response was received at all.
  std::string transportError;
};

using Headers = std::vector<std::pair<std::string, std::string>>;
using HttpPost = std::function<HttpReply(const std::string& url, const Headers&, const std::string& body)>;

struct EndpointConfig {
  std::string url;
  std::string apiKey;
  std::string modelId = "gpt-4o";
  int maxAttempts = 3;
  std::chrono::milliseconds initialBackoff{500};
  double backoffFactor = 2.0;
  std::chrono::seconds timeout{120};

  // MORAE_MODEL_URL / MORAE_MODEL_KEY / MORAE_MODEL_ID.
  static EndpointConfig from_env() {
    EndpointConfig c;
    auto get = [](const char* k) -> std::string {
      const char* v = std::getenv(k);
      return v ? std::string(v) : std::string();
    };
    c.url = get("MORAE_MODEL_URL");
    c.apiKey = get("MORAE_MODEL_KEY");
    if (auto id = get("MORAE_MODEL_ID"); !id.empty()) c.modelId = id;
    return c;
  }

  // Visual verification endpoint: MORAE_VERIFY_MODEL_URL, else the primary.
  static EndpointConfig verify_from_env() {
    auto c = from_env();
    if (const char* v = std::getenv("MORAE_VERIFY_MODEL_URL"); v && *v) c.url = v;
    if (const char* k = std::getenv("MORAE_VERIFY_MODEL_KEY"); k && *k) c.apiKey = k;
    if (const char* m = std::getenv("MORAE_VERIFY_MODEL_ID"); m && *m) c.modelId = m;
    return c;
  }
};

namespace http_detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("model URL must include a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline HttpReply httplib_post(const std::string& url, const Headers& headers, const std::string& body,
                              std::chrono::seconds timeout) {
  const auto parts = split_url(url);
  httplib::Client cli(parts.origin);
  cli.set_connection_timeout(std::chrono::seconds(10));
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = cli.Post(parts.path, h, body, "application/json");
  if (!res) return {0, {}, httplib::to_string(res.error())};
  return {res->status, res->body, {}};
}

}  // namespace http_detail

// Resolves an attachment id to something the endpoint can fetch
// (a data: URL or an http URL). Empty result leaves the image out.
using AttachmentResolver = std::function<std::string(const std::string& id)>;

// Screenshot ids that are URLs pass through; anything else is read as a file
// under `base` and sent inline.
inline AttachmentResolver file_attachments(std::filesystem::path base) {
  return [base = std::move(base)](const std::string& id) -> std::string {
    if (id.rfind("http://", 0) == 0 || id.rfind("https://", 0) == 0 || id.rfind("data:", 0) == 0) return id;
    std::filesystem::path p(id);
    if (p.is_relative() && !base.empty()) p = base / p;
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto ext = text::lower(p.extension().string());
    const char* mime = ext == ".jpg" || ext == ".jpeg" ? "image/jpeg" : ext == ".webp" ? "image/webp" : "image/png";
    return std::string("data:") + mime + ";base64," + httplib::detail::base64_encode(bytes);
  };
}

class HttpModelClient final : public ModelClient {
 public:
  explicit HttpModelClient(EndpointConfig config, HttpPost post = {}, AttachmentResolver attachments = {})
      : config_(std::move(config)), post_(std::move(post)), attachments_(std::move(attachments)) {
    if (config_.url.empty()) throw ConfigError("model endpoint URL is not configured (MORAE_MODEL_URL)");
    if (config_.maxAttempts < 1) throw ConfigError("maxAttempts must be >= 1");
    if (!post_) {
      auto timeout = config_.timeout;
      post_ = [timeout](const std::string& u, const Headers& h, const std::string& b) {
        return http_detail::httplib_post(u, h, b, timeout);
      };
    }
  }

  Json payload(const ModelRequest& r) const {
    Json msgs = Json::array();
    msgs.push_back({{"role", "system"}, {"content", r.systemPrompt}});
    for (const auto& m : r.messages) {
      std::string image;
      if (m.imageRef && attachments_) image = attachments_(*m.imageRef);
      if (image.empty()) {
        msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
      } else {
        Json parts = Json::array();
        parts.push_back({{"type", "text"}, {"text", m.content}});
        parts.push_back({{"type", "image_url"}, {"image_url", {{"url", image}}}});
        msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", std::move(parts)}});
      }
    }
    return {{"model", r.modelId.empty() ? config_.modelId : r.modelId},
            {"messages", std::move(msgs)},
            {"temperature", r.temperature}};
  }

  std::string complete(const ModelRequest& request) override {
    const auto body = payload(request).dump();
    Headers headers{{"Content-Type", "application/json"}};
    if (!config_.apiKey.empty()) headers.emplace_back("Authorization", "Bearer " + config_.apiKey);

    auto backoff = config_.initialBackoff;
    std::string last;
    for (int attempt = 1; attempt <= config_.maxAttempts; ++attempt) {
      ++attempts_;
      const auto reply = post_(config_.url, headers, body);
      if (reply.transportError.empty()) {
        if (reply.status == 401 || reply.status == 403)
          throw CredentialError("model endpoint rejected credentials (HTTP " + std::to_string(reply.status) + ")");
        if (reply.status >= 200 && reply.status < 300) return extract_content(reply.body);
        const bool transient = reply.status >= 500 || reply.status == 429 || reply.status == 408;
        if (!transient)
          throw GatewayError("model endpoint returned HTTP " + std::to_string(reply.status) + ": " +
                             reply.body.substr(0, 200));
        last = "HTTP " + std::to_string(reply.status);
      } else {
        last = reply.transportError;
      }
      if (attempt < config_.maxAttempts) {
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * config_.backoffFactor));
      }
    }
    throw GatewayError("model endpoint unreachable after " + std::to_string(config_.maxAttempts) +
                       " attempts: " + last);
  }

  // Total HTTP attempts made by this client, retries included.
  int attempts() const { return attempts_.load(); }

  static std::string extract_content(const std::string& body) {
    Json j;
    try {
      j = Json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      throw ProtocolError("model endpoint returned non-JSON body", body);
    }
    try {
      const auto& content = j.at("choices").at(0).at("message").at("content");
      if (content.is_string()) return content.get<std::string>();
      std::string out;
      for (const auto& part : content)
        if (part.value("type", "") == "text") out += part.value("text", "");
      return out;
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("model endpoint reply has no choices[0].message.content", body);
    }
  }

 private:
  EndpointConfig config_;
  HttpPost post_;
  AttachmentResolver attachments_;
  std::atomic<int> attempts_{0};
};

}  // namespace morae
