#include "hydec/remote.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "hydec/log.hpp"

namespace hydec {

std::string remote_complete(const RemoteEndpoint& endpoint,
                            const std::string& prompt_text,
                            const SamplingParams& params, int max_tokens) {
  if (endpoint.retry_budget < 0) throw Error("retry budget must be >= 0");

  nlohmann::ordered_json body;
  body["model"] = endpoint.model;
  body["prompt"] = prompt_text;
  body["max_tokens"] = max_tokens;
  // Greedy maps to temperature 0 on the wire.
  body["temperature"] =
      params.mode == SamplingParams::Mode::kGreedy ? 0.0 : params.temperature;
  body["top_p"] = params.mode == SamplingParams::Mode::kGreedy ? 1.0 : params.top_p;
  body["stream"] = false;
  const std::string payload = body.dump();

  const int attempts = 1 + endpoint.retry_budget;
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const int wait = endpoint.backoff_ms * (1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::milliseconds(wait));
    }

    httplib::Client client(endpoint.base_url);
    client.set_connection_timeout(0, endpoint.timeout_ms * 1000LL);
    client.set_read_timeout(0, endpoint.timeout_ms * 1000LL);
    client.set_write_timeout(0, endpoint.timeout_ms * 1000LL);
    if (!endpoint.auth_token.empty())
      client.set_bearer_token_auth(endpoint.auth_token);

    auto res = client.Post("/v1/completions", payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      log_warn("remote_complete attempt " + std::to_string(attempt + 1) + "/" +
               std::to_string(attempts) + " failed: " + last_error);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      // Server-side failures are retried; client errors are final.
      last_error = "http status " + std::to_string(res->status);
      if (res->status >= 500) {
        log_warn("remote_complete attempt " + std::to_string(attempt + 1) + "/" +
                 std::to_string(attempts) + " failed: " + last_error);
        continue;
      }
      throw BackendError("remote completion failed: " + last_error);
    }

    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed completion body: ") + e.what());
    }
    if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() || !parsed["choices"][0].contains("text") ||
        !parsed["choices"][0]["text"].is_string())
      throw FormatError("completion body missing choices[0].text");
    return parsed["choices"][0]["text"].get<std::string>();
  }
  throw BackendError("remote completion failed after " +
                     std::to_string(attempts) + " attempts: " + last_error);
}

Proposal RemoteBackend::propose_next(std::span<const TokenId> prefix,
                                     const SamplingParams& params) const {
  if (prefix.empty()) throw Error("propose_next: empty prefix");

  const std::string prompt_text = vocab_->decode_text(prefix);
  const std::string completion = remote_complete(endpoint_, prompt_text, params, 1);

  auto units = Vocab::split_units(completion, vocab_->granularity());
  if (units.empty()) throw BackendError("remote returned empty completion");
  TokenId tok;
  if (strict_) {
    if (!vocab_->contains(units[0]))
      throw Error("vocab mismatch: unknown unit '" + units[0] + "'");
    tok = vocab_->id_of(units[0]);
  } else {
    tok = vocab_->id_of(units[0]);
  }
  return {tok, std::numeric_limits<double>::quiet_NaN()};
}

}  // namespace hydec
