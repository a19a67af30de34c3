#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmsurv::summarizer {

enum class Role { System, User };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

// Greedy decoding: temperature 0, at most 1024 new tokens, fixed seed.
struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 1024;
  std::int64_t seed = 0;
  bool greedy = true;
};

inline constexpr std::string_view kSystemPrompt = "You are a helpful assistant for digital pathology.";
inline constexpr std::string_view kInstructionPrompt =
    "Instructions:\n"
    "Extract and repeat the results of the following pathology report in a single paragraph.\n"
    "Focus on test results, diagnoses and clinical history.\n"
    "Include results of the microscopic description.\n"
    "Omit the gross or macroscopic description.\n"
    "Do not acknowledge this prompt.\n"
    "Do not give additional comments after your final answer.";

// [system: kSystemPrompt, system: kInstructionPrompt, user: report_text].
std::vector<ChatMessage> build_prompt(std::string_view report_text);

// Compact JSON body {model, messages, temperature, max_tokens, seed} in that
// key order.
std::string serialize_request(std::string_view model, const std::vector<ChatMessage>& messages,
                              const DecodingParams& params);

struct Endpoint {
  std::string url;    // full URL of the chat-completions route
  std::string token;  // bearer token; empty = no Authorization header
  std::string model;
};

// MMSURV_ENDPOINT_URL, MMSURV_API_TOKEN, MMSURV_MODEL.
Endpoint endpoint_from_env();

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_delay{500};
  double backoff_factor = 2.0;
};

struct BatchOptions {
  int concurrency = 4;
  RetryPolicy retry;
  std::chrono::seconds timeout{300};
};

struct ReportInput {
  std::string case_id;
  std::string text;
};

struct SummaryOutput {
  std::string case_id;
  std::string summary;
};

struct SummaryFailure {
  std::string case_id;
  std::string error;
  int attempts = 0;
};

struct BatchResult {
  std::vector<SummaryOutput> summaries;  // input order
  std::vector<SummaryFailure> failures;  // input order
};

// One request per report. Non-2xx responses and transport errors are retried
// with exponential backoff; a malformed body fails that case immediately.
// Failures never abort the batch.
BatchResult summarize_batch(std::span<const ReportInput> reports, const Endpoint& endpoint,
                            const DecodingParams& params, const BatchOptions& options = {});

// Text of choices[0].message.content (or choices[0].text). Throws on anything else.
std::string parse_completion(std::string_view body);

std::vector<ReportInput> read_reports_jsonl(const std::filesystem::path& path);
void write_summaries_jsonl(const std::vector<SummaryOutput>& summaries, const std::filesystem::path& path);
void write_failures_jsonl(const std::vector<SummaryFailure>& failures, const std::filesystem::path& path);

}  // namespace mmsurv::summarizer
