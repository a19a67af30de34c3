#include "mmsurv/summarizer.hpp"

#include "mmsurv/common.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <thread>

namespace mmsurv::summarizer {

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("endpoint URL needs a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw Error("unsupported URL scheme: " + scheme);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

struct Attempt {
  std::optional<std::string> summary;
  std::string error;
  bool retryable = false;
};

Attempt request_once(httplib::Client& client, const std::string& path, const std::string& body) {
  auto res = client.Post(path, body, "application/json");
  if (!res) return {std::nullopt, "transport error: " + httplib::to_string(res.error()), true};
  if (res->status < 200 || res->status >= 300) {
    return {std::nullopt, "HTTP " + std::to_string(res->status), true};
  }
  try {
    return {parse_completion(res->body), {}, false};
  } catch (const Error& e) {
    return {std::nullopt, e.what(), false};
  }
}

}  // namespace

std::string_view to_string(Role role) { return role == Role::System ? "system" : "user"; }

std::vector<ChatMessage> build_prompt(std::string_view report_text) {
  if (report_text.empty()) throw Error("empty report");
  return {{Role::System, std::string(kSystemPrompt)},
          {Role::System, std::string(kInstructionPrompt)},
          {Role::User, std::string(report_text)}};
}

std::string serialize_request(std::string_view model, const std::vector<ChatMessage>& messages,
                              const DecodingParams& params) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    if (m.content.empty()) throw Error("chat message content must be nonempty");
    body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  body["seed"] = params.seed;
  return body.dump();
}

Endpoint endpoint_from_env() {
  auto get = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  Endpoint e{get("MMSURV_ENDPOINT_URL"), get("MMSURV_API_TOKEN"), get("MMSURV_MODEL")};
  if (e.url.empty()) throw Error("MMSURV_ENDPOINT_URL is not set");
  if (e.model.empty()) throw Error("MMSURV_MODEL is not set");
  return e;
}

std::string parse_completion(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw Error("malformed response: not JSON");
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error("malformed response: no choices");
  }
  const auto& choice = j["choices"][0];
  if (choice.contains("message") && choice["message"].is_object() &&
      choice["message"].contains("content") && choice["message"]["content"].is_string()) {
    return choice["message"]["content"].get<std::string>();
  }
  if (choice.contains("text") && choice["text"].is_string()) return choice["text"].get<std::string>();
  throw Error("malformed response: no message content");
}

BatchResult summarize_batch(std::span<const ReportInput> reports, const Endpoint& endpoint,
                            const DecodingParams& params, const BatchOptions& options) {
  if (options.concurrency < 1) throw Error("concurrency must be at least 1");
  if (options.retry.max_attempts < 1) throw Error("max_attempts must be at least 1");
  const auto url = parse_url(endpoint.url);

  struct Slot {
    std::optional<std::string> summary;
    std::string error;
    int attempts = 0;
  };
  std::vector<Slot> slots(reports.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);
    if (!endpoint.token.empty()) client.set_bearer_token_auth(endpoint.token);

    for (std::size_t i = next++; i < reports.size(); i = next++) {
      Slot& slot = slots[i];
      std::string body;
      try {
        body = serialize_request(endpoint.model, build_prompt(reports[i].text), params);
      } catch (const Error& e) {
        slot.error = e.what();
        continue;
      }
      auto delay = options.retry.initial_delay;
      for (int attempt = 1; attempt <= options.retry.max_attempts; ++attempt) {
        slot.attempts = attempt;
        auto a = request_once(client, url.path, body);
        if (a.summary) {
          slot.summary = std::move(a.summary);
          slot.error.clear();
          break;
        }
        slot.error = std::move(a.error);
        if (!a.retryable || attempt == options.retry.max_attempts) break;
        std::this_thread::sleep_for(delay);
        delay = std::chrono::milliseconds(static_cast<long long>(
            std::llround(static_cast<double>(delay.count()) * options.retry.backoff_factor)));
      }
    }
  };

  {
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(options.concurrency),
                                                 std::max<std::size_t>(reports.size(), 1));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  BatchResult result;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (slots[i].summary) {
      result.summaries.push_back({reports[i].case_id, std::move(*slots[i].summary)});
    } else {
      result.failures.push_back({reports[i].case_id, slots[i].error, slots[i].attempts});
    }
  }
  return result;
}

std::vector<ReportInput> read_reports_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<ReportInput> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ReportInput r{j.at("case_id").get<std::string>(), j.at("text").get<std::string>()};
      if (!seen.insert(r.case_id).second) throw Error("duplicate case_id " + r.case_id);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_summaries_jsonl(const std::vector<SummaryOutput>& summaries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& s : summaries) {
    nlohmann::ordered_json j;
    j["case_id"] = s.case_id;
    j["summary"] = s.summary;
    out << j.dump() << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

void write_failures_jsonl(const std::vector<SummaryFailure>& failures, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& f : failures) {
    nlohmann::ordered_json j;
    j["case_id"] = f.case_id;
    j["error"] = f.error;
    j["attempts"] = f.attempts;
    out << j.dump() << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace mmsurv::summarizer
