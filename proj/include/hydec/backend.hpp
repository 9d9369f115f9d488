#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hydec/common.hpp"
#include "hydec/ngram.hpp"
#include "hydec/vocab.hpp"

namespace hydec {

struct SamplingParams {
  enum class Mode { kGreedy, kSample };
  Mode mode = Mode::kGreedy;
  double temperature = 1.0;  // ignored in greedy mode
  double top_p = 1.0;        // ignored in greedy mode
  uint64_t seed = 0;
};

struct Proposal {
  TokenId token = 0;
  double logprob = 0.0;  // under the backend's (untempered) distribution
};

// Uniform token-generation abstraction. Implementations are immutable and
// safe for concurrent use.
class GenBackend {
 public:
  virtual ~GenBackend() = default;
  virtual const Vocab& vocab() const = 0;
  virtual std::string name() const = 0;

  // Proposes one next token for a non-empty prefix. Greedy mode returns the
  // argmax with lowest-id tie-breaking. Sampling derives its randomness from
  // (params.seed, prefix), so identical inputs always yield identical output.
  virtual Proposal propose_next(std::span<const TokenId> prefix,
                                const SamplingParams& params) const = 0;
};

class NgramBackend : public GenBackend {
 public:
  NgramBackend(NgramModel model, std::string name)
      : model_(std::move(model)), name_(std::move(name)) {}

  const Vocab& vocab() const override { return model_.vocab(); }
  std::string name() const override { return name_; }
  const NgramModel& model() const { return model_; }

  Proposal propose_next(std::span<const TokenId> prefix,
                        const SamplingParams& params) const override;

 private:
  NgramModel model_;
  std::string name_;
};

// Picks a token from a dense probability distribution. Greedy: argmax with
// lowest-id ties. Sample: temperature then top-p truncation (descending by
// probability, inclusive of the crossing token), renormalize, draw.
TokenId choose_token(std::span<const double> probs, const SamplingParams& params,
                     uint64_t prefix_hash);

// Iterates propose_next until EOS or max_tokens; returns the continuation
// only. max_tokens must be >= 1.
TokenSeq generate(const GenBackend& backend, std::span<const TokenId> prompt,
                  const SamplingParams& params, int max_tokens);

}  // namespace hydec
