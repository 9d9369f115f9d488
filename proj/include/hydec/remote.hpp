#pragma once

#include <string>

#include "hydec/backend.hpp"

namespace hydec {

struct RemoteEndpoint {
  std::string base_url;    // e.g. http://127.0.0.1:8000
  std::string model;
  std::string auth_token;  // optional bearer token
  int timeout_ms = 30000;
  int retry_budget = 2;    // a request is attempted at most 1 + retry_budget times
  int backoff_ms = 100;    // doubles per retry
};

// Issues one POST {base_url}/v1/completions request (fields: model, prompt,
// max_tokens, temperature, top_p, stream=false) and returns choices[0].text.
// Retries with exponential backoff on transport failure; throws BackendError
// after the retry budget is exhausted or on a non-2xx status, FormatError on
// a malformed body.
std::string remote_complete(const RemoteEndpoint& endpoint,
                            const std::string& prompt_text,
                            const SamplingParams& params, int max_tokens);

// GenBackend over a remote completion endpoint. The prefix is rendered to
// text with the local vocab and the first unit of the completion is
// re-tokenized locally (lossy for tokenizers that differ from ours). The
// returned logprob is NaN: the remote distribution is unknown.
class RemoteBackend : public GenBackend {
 public:
  RemoteBackend(RemoteEndpoint endpoint, const Vocab& vocab,
                bool strict_vocab = true)
      : endpoint_(std::move(endpoint)), vocab_(&vocab), strict_(strict_vocab) {}

  const Vocab& vocab() const override { return *vocab_; }
  std::string name() const override { return "remote:" + endpoint_.model; }

  Proposal propose_next(std::span<const TokenId> prefix,
                        const SamplingParams& params) const override;

 private:
  RemoteEndpoint endpoint_;
  const Vocab* vocab_;
  bool strict_;
};

}  // namespace hydec
