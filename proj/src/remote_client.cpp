#include <cstdlib>
#include <fstream>

#include "httplib.h"
#include "toxdebias/relabel.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

using nlohmann::json;

RemoteConfig RemoteConfig::from_environment() {
  RemoteConfig c;
  if (const char* e = std::getenv("TRANSLATE_ENDPOINT"); e && *e) c.endpoint = e;
  if (const char* k = std::getenv("TRANSLATE_API_KEY"); k && *k) c.api_key = k;
  if (c.endpoint.empty()) throw UsageError("TRANSLATE_ENDPOINT is not set");
  return c;
}

json RemoteConfig::to_json() const {
  return {{"endpoint", endpoint},
          {"temperature", temperature},
          {"top_p", top_p},
          {"max_tokens", max_tokens},
          {"timeout_seconds", timeout_seconds},
          {"audit_log", audit_log ? json(audit_log->string()) : json(nullptr)}};
}

RemoteCompletionClient::RemoteCompletionClient(RemoteConfig config, bool acknowledged)
    : config_(std::move(config)) {
  if (!acknowledged) {
    throw UsageError(
        "the remote translation backend is disabled; pass --i-understand-the-limitations to enable it");
  }
  if (config_.endpoint.empty()) throw UsageError("remote translation endpoint is empty");
}

void RemoteCompletionClient::audit(const json& entry) {
  if (!config_.audit_log) return;
  std::lock_guard lock(audit_mutex_);
  std::filesystem::create_directories(config_.audit_log->parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : config_.audit_log->parent_path());
  std::ofstream out(*config_.audit_log, std::ios::app | std::ios::binary);
  out << entry.dump() << '\n';
}

std::string RemoteCompletionClient::translate(const std::string& id, const std::string& text) {
  // Split "scheme://host[:port]/path".
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw UsageError("endpoint must be an absolute URL");
  const auto path_begin = config_.endpoint.find('/', scheme_end + 3);
  const std::string base = config_.endpoint.substr(0, path_begin);
  const std::string path =
      path_begin == std::string::npos ? "/" : config_.endpoint.substr(path_begin);

  const json request = {{"prompt", build_prompt(text)},
                        {"temperature", config_.temperature},
                        {"top_p", config_.top_p},
                        {"max_tokens", config_.max_tokens},
                        {"stop", json::array({"\n"})}};

  httplib::Client client(base);
  const auto secs = static_cast<time_t>(config_.timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto res = client.Post(path, headers, request.dump(), "application/json");
  json entry = {{"id", id}, {"request", request}};
  if (!res) {
    entry["error"] = httplib::to_string(res.error());
    audit(entry);
    throw RemoteError("request for '" + id + "' failed: " + httplib::to_string(res.error()));
  }
  entry["status"] = res->status;
  entry["response"] = res->body;
  audit(entry);
  if (res->status != 200) {
    throw RemoteError("request for '" + id + "' returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto body = json::parse(res->body);
    std::string completion;
    if (body.contains("choices")) {
      completion = body.at("choices").at(0).at("text").get<std::string>();
    } else {
      completion = body.at("text").get<std::string>();
    }
    return clean_completion(completion);
  } catch (const json::exception& e) {
    throw RemoteError("unreadable response for '" + id + "': " + e.what());
  }
}

}  // namespace toxdebias
