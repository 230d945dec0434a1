#pragma once

// Chat-completion client and the restructure -> validate -> follow-up ->
// restart loop. Speaks the OpenAI-compatible /chat/completions schema.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hyperhier/error.hpp"
#include "hyperhier/hierarchy.hpp"
#include "hyperhier/restructure.hpp"

namespace hyperhier {

struct LlmConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  std::string api_key_env = "LLM_API_KEY";
  double timeout_seconds = 120.0;
  std::size_t max_follow_ups = 3;
  std::size_t max_restarts = 2;
  double temperature = 0.0;
  std::size_t max_input_tokens = 120000;  // rough estimate: 4 characters per token
  std::size_t max_http_attempts = 3;      // per request, for 429 / 5xx
  double initial_backoff_seconds = 1.0;   // doubled after each retry

  /// Defaults overridden by LLM_BASE_URL and LLM_MODEL when set.
  static LlmConfig from_env() {
    LlmConfig c;
    if (const char* v = std::getenv("LLM_BASE_URL"); v && *v) c.base_url = v;
    if (const char* v = std::getenv("LLM_MODEL"); v && *v) c.model = v;
    return c;
  }

  void validate() const {
    if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidConfig, "timeout must be positive");
    if (max_http_attempts < 1) throw Error(ErrorCode::InvalidConfig, "at least one HTTP attempt is required");
    if (!(initial_backoff_seconds >= 0.0)) throw Error(ErrorCode::InvalidConfig, "backoff must be non-negative");
    if (base_url.empty()) throw Error(ErrorCode::InvalidConfig, "empty endpoint URL");
  }
};

struct Turn {
  std::string role;  // "user" or "assistant"
  std::string content;
  std::int64_t timestamp_us = 0;
  std::size_t conversation = 0;  // restart index
};

struct TranscriptBlock {
  std::size_t turn = 0;  // index into SessionTranscript::turns
  std::string text;
};

/// Append-only record of everything sent and received in one session.
struct SessionTranscript {
  std::vector<Turn> turns;
  std::vector<TranscriptBlock> hierarchies;
  std::vector<TranscriptBlock> explanations;
  std::size_t http_attempts = 0;

  std::size_t count(std::string_view role) const {
    std::size_t n = 0;
    for (const auto& t : turns) n += t.role == role;
    return n;
  }

  /// Timestamps are forced strictly increasing so turn order is recoverable.
  void append(std::string role, std::string content, std::size_t conversation) {
    auto now = std::chrono::duration_cast<std::chrono::microseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
    if (!turns.empty() && now <= turns.back().timestamp_us) now = turns.back().timestamp_us + 1;
    turns.push_back({std::move(role), std::move(content), now, conversation});
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["turns"] = nlohmann::ordered_json::array();
    for (const auto& t : turns)
      j["turns"].push_back(
          {{"role", t.role}, {"content", t.content}, {"timestamp_us", t.timestamp_us}, {"conversation", t.conversation}});
    auto blocks = [](const std::vector<TranscriptBlock>& bs) {
      auto a = nlohmann::ordered_json::array();
      for (const auto& b : bs) a.push_back({{"turn", b.turn}, {"text", b.text}});
      return a;
    };
    j["hierarchies"] = blocks(hierarchies);
    j["explanations"] = blocks(explanations);
    j["http_attempts"] = http_attempts;
    return j;
  }
};

class ExhaustedAttemptsError : public Error {
 public:
  ExhaustedAttemptsError(SessionTranscript transcript, ValidationReport last)
      : Error(ErrorCode::ExhaustedAttempts,
              "no valid restructuring after " + std::to_string(transcript.count("assistant")) + " replies"),
        transcript_(std::move(transcript)),
        last_(std::move(last)) {}

  const SessionTranscript& transcript() const noexcept { return transcript_; }
  const ValidationReport& last_report() const noexcept { return last_; }

 private:
  SessionTranscript transcript_;
  ValidationReport last_;
};

namespace detail {

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

inline Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidConfig, "endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  e.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

inline std::string read_reply(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  try {
    const auto& msg = j.at("choices").at(0).at("message");
    const auto& content = msg.at("content");
    if (!content.is_string()) throw Error(ErrorCode::MalformedResponse, "message content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::MalformedResponse, "response lacks choices[0].message.content");
  }
}

}  // namespace detail

/// Sends `messages` (the current conversation, oldest first) and returns the
/// assistant reply. When a transcript is given, the newest request and the
/// reply are appended to it. 429 and 5xx answers are retried with
/// exponential backoff up to config.max_http_attempts requests in total.
inline Turn request_completion(const LlmConfig& config, const std::vector<Turn>& messages,
                               SessionTranscript* transcript = nullptr, std::size_t conversation = 0) {
  config.validate();
  const char* key = std::getenv(config.api_key_env.c_str());
  if (!key || !*key) throw Error(ErrorCode::AuthMissing, "environment variable " + config.api_key_env + " is not set");
  if (messages.empty()) throw Error(ErrorCode::InvalidConfig, "no messages to send");

  std::size_t chars = 0;
  for (const auto& m : messages) chars += m.content.size();
  if (chars / 4 > config.max_input_tokens)
    throw Error(ErrorCode::InputTooLarge, "conversation of ~" + std::to_string(chars / 4) + " tokens exceeds the budget of " +
                                              std::to_string(config.max_input_tokens));

  nlohmann::json body;
  body["model"] = config.model;
  body["temperature"] = config.temperature;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const std::string payload = body.dump();

  const auto ep = detail::split_url(config.base_url);
  httplib::Client cli(ep.scheme_host_port);
  if (!cli.is_valid()) throw Error(ErrorCode::TransportError, "unsupported endpoint " + config.base_url);
  const auto secs = static_cast<time_t>(config.timeout_seconds);
  const auto usecs = static_cast<time_t>((config.timeout_seconds - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  const httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

  if (transcript) transcript->append(messages.back().role, messages.back().content, conversation);

  double backoff = config.initial_backoff_seconds;
  for (std::size_t attempt = 1;; ++attempt) {
    if (transcript) ++transcript->http_attempts;
    auto res = cli.Post(ep.path_prefix + "/chat/completions", headers, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read || err == httplib::Error::Write)
        throw Error(ErrorCode::Timeout, "request failed: " + httplib::to_string(err));
      throw Error(ErrorCode::TransportError, "request failed: " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status == 200) {
      Turn reply{"assistant", detail::read_reply(res->body), 0, conversation};
      if (transcript) {
        transcript->append(reply.role, reply.content, conversation);
        reply.timestamp_us = transcript->turns.back().timestamp_us;
      }
      return reply;
    }
    const bool retryable = status == 429 || status >= 500;
    if (retryable && attempt < config.max_http_attempts) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2;
      continue;
    }
    if (status == 401 || status == 403) throw Error(ErrorCode::AuthMissing, "service rejected the API key (HTTP " + std::to_string(status) + ")");
    if (status == 429) throw Error(ErrorCode::RateLimited, "rate limited after " + std::to_string(attempt) + " attempts");
    throw Error(ErrorCode::TransportError, "HTTP " + std::to_string(status) + " after " + std::to_string(attempt) + " attempts");
  }
}

// ---------------------------------------------------------------------------
// Reply parsing.

namespace detail {

inline bool is_fence(std::string_view line) { return trim(line).substr(0, 3) == "```"; }

/// Level of a line under the strict grammar, or nullopt if it cannot be a
/// hierarchy line.
inline std::optional<std::size_t> strict_level(std::string_view line) {
  std::size_t spaces = 0;
  while (spaces < line.size() && line[spaces] == ' ') ++spaces;
  if (spaces < line.size() && line[spaces] == '\t') return std::nullopt;
  if (spaces % 2 != 0) return std::nullopt;
  return spaces / 2;
}

struct LineSpan {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive, a node line
  std::size_t nodes = 0;
};

inline std::vector<std::string> reply_lines(std::string_view reply) {
  std::vector<std::string> out;
  for (auto l : split_lines(reply)) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    out.emplace_back(l);
  }
  return out;
}

/// Longest runs of lines that parse as one tree. Runs start at an
/// unindented line and stop at a fence, a second root, an indent jump, a
/// malformed indent or a repeated label; blank lines inside a run are kept.
inline std::optional<LineSpan> best_block(const std::vector<std::string>& lines) {
  std::optional<LineSpan> best;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_fence(lines[i]) || trim(lines[i]).empty()) continue;
    auto lvl = strict_level(lines[i]);
    if (!lvl || *lvl != 0) continue;
    LineSpan span{i, i, 1};
    std::unordered_set<std::string> seen{std::string(trim(lines[i]))};
    std::size_t depth = 1;  // open ancestors
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (is_fence(lines[j])) break;
      const auto label = trim(lines[j]);
      if (label.empty()) continue;
      auto l = strict_level(lines[j]);
      if (!l || *l == 0 || *l > depth) break;
      if (!seen.insert(std::string(label)).second) break;
      depth = *l + 1;
      span.last = j;
      ++span.nodes;
    }
    // Ties go to the later block: replies tend to end with the final answer.
    if (span.nodes >= 2 && (!best || span.nodes >= best->nodes)) best = span;
  }
  return best;
}

}  // namespace detail

/// The largest contiguous block of reply lines that parses under the
/// indented-text grammar (fenced or not), or nullopt when no block of at
/// least two nodes exists.
inline std::optional<std::string> extract_hierarchy(std::string_view reply) {
  const auto lines = detail::reply_lines(reply);
  const auto span = detail::best_block(lines);
  if (!span) return std::nullopt;
  std::string out;
  for (std::size_t i = span->first; i <= span->last; ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    out += lines[i];
    out += '\n';
  }
  return out;
}

/// Everything in a reply except the extracted hierarchy and code fences.
inline std::string extract_explanation(std::string_view reply) {
  const auto lines = detail::reply_lines(reply);
  const auto span = detail::best_block(lines);
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (span && i >= span->first && i <= span->last) continue;
    if (detail::is_fence(lines[i])) continue;
    out += lines[i];
    out += '\n';
  }
  const auto first = out.find_first_not_of(" \t\n");
  if (first == std::string::npos) return {};
  const auto last = out.find_last_not_of(" \t\n");
  return out.substr(first, last - first + 1);
}

/// Follow-up request naming each failed criterion with its evidence.
inline std::string follow_up_message(const ValidationReport& report, bool block_found) {
  std::string msg;
  if (!block_found) {
    msg = "The previous hierarchy failed criterion 4: no hierarchy block found in the reply.\n";
  } else {
    for (int k : report.failed_criteria())
      msg += "The previous hierarchy failed criterion " + std::to_string(k) + ": " + report.evidence(k) + ".\n";
  }
  msg += "Please output the full corrected hierarchy in the same format.";
  return msg;
}

struct SessionResult {
  RestructureOutcome outcome;
  SessionTranscript transcript;
};

/// Prompts, validates each reply, sends up to max_follow_ups repair
/// requests per conversation and restarts from the original prompt up to
/// max_restarts times. A passing outcome is always re-validated locally.
/// Exhaustion after (max_follow_ups + 1) * (max_restarts + 1) replies throws
/// ExhaustedAttemptsError carrying the transcript.
inline SessionResult restructure_session(const LlmConfig& config, const Hierarchy& original, const RecommendationSet& recs) {
  config.validate();
  const std::string prompt = assemble_prompt(serialize_text(original), recs);
  SessionTranscript transcript;
  ValidationReport last;
  std::string explanation;

  for (std::size_t restart = 0; restart <= config.max_restarts; ++restart) {
    std::vector<Turn> messages{{"user", prompt, 0, restart}};
    for (std::size_t follow = 0;; ++follow) {
      Turn reply = request_completion(config, messages, &transcript, restart);
      const std::size_t turn_index = transcript.turns.size() - 1;
      const auto block = extract_hierarchy(reply.content);
      const auto prose = extract_explanation(reply.content);
      if (!prose.empty()) {
        transcript.explanations.push_back({turn_index, prose});
        explanation += (explanation.empty() ? "" : "\n\n") + prose;
      }
      if (block) {
        transcript.hierarchies.push_back({turn_index, *block});
        last = validate_candidate(original, *block);
      } else {
        last = ValidationReport{};
        last.details.parse_error = "no hierarchy block found in the reply";
      }

      if (block && last.passed()) {
        auto tree = parse_text(*block);
        RestructureOutcome out;
        out.validation = last;
        out.explanation = explanation;
        out.diff = structural_diff(original, tree);
        out.candidate = std::move(tree);
        out.follow_ups = follow;
        out.restarts = restart;
        return {std::move(out), std::move(transcript)};
      }
      if (follow == config.max_follow_ups) break;
      messages.push_back(std::move(reply));
      messages.push_back({"user", follow_up_message(last, block.has_value()), 0, restart});
    }
  }
  throw ExhaustedAttemptsError(std::move(transcript), std::move(last));
}

}  // namespace hyperhier
