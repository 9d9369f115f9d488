#include "hydec/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hydec {

namespace {

// One uniform double in [0, 1) from the top 53 bits; avoids the
// implementation-defined std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

TokenId choose_token(std::span<const double> probs, const SamplingParams& params,
                     uint64_t prefix_hash) {
  const size_t v = probs.size();
  if (v == 0) throw Error("empty distribution");

  if (params.mode == SamplingParams::Mode::kGreedy) {
    size_t best = 0;
    for (size_t i = 1; i < v; ++i)
      if (probs[i] > probs[best]) best = i;
    return static_cast<TokenId>(best);
  }

  if (!(params.temperature > 0.0)) throw Error("temperature must be > 0");
  if (!(params.top_p > 0.0) || params.top_p > 1.0)
    throw Error("top_p must be in (0, 1]");

  // Temperature in log space to dodge underflow at small T.
  std::vector<double> logw(v);
  double max_logw = -HUGE_VAL;
  for (size_t i = 0; i < v; ++i) {
    logw[i] = std::log(probs[i]) / params.temperature;
    max_logw = std::max(max_logw, logw[i]);
  }
  std::vector<double> w(v);
  double sum = 0.0;
  for (size_t i = 0; i < v; ++i) {
    w[i] = std::exp(logw[i] - max_logw);
    sum += w[i];
  }

  std::vector<uint32_t> order(v);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    if (w[a] != w[b]) return w[a] > w[b];
    return a < b;
  });

  // Nucleus cut: include tokens until cumulative mass reaches top_p,
  // inclusive of the crossing token.
  size_t cut = v;
  double cum = 0.0;
  for (size_t i = 0; i < v; ++i) {
    cum += w[order[i]] / sum;
    if (cum >= params.top_p) {
      cut = i + 1;
      break;
    }
  }

  double kept = 0.0;
  for (size_t i = 0; i < cut; ++i) kept += w[order[i]];

  std::mt19937_64 rng(derive_seed(params.seed, prefix_hash));
  const double u = uniform01(rng) * kept;
  double acc = 0.0;
  for (size_t i = 0; i < cut; ++i) {
    acc += w[order[i]];
    if (u < acc) return static_cast<TokenId>(order[i]);
  }
  return static_cast<TokenId>(order[cut - 1]);
}

Proposal NgramBackend::propose_next(std::span<const TokenId> prefix,
                                    const SamplingParams& params) const {
  if (prefix.empty()) throw Error("propose_next: empty prefix");
  const auto probs = model_.distribution(prefix);
  const TokenId tok = choose_token(probs, params, hash_tokens(prefix));
  return {tok, std::log(probs[static_cast<size_t>(tok)])};
}

TokenSeq generate(const GenBackend& backend, std::span<const TokenId> prompt,
                  const SamplingParams& params, int max_tokens) {
  if (max_tokens < 1) throw Error("max_tokens must be >= 1");

  std::vector<TokenId> prefix(prompt.begin(), prompt.end());
  TokenSeq out;
  for (int i = 0; i < max_tokens; ++i) {
    const Proposal p = backend.propose_next(prefix, params);
    out.push_back(p.token);
    prefix.push_back(p.token);
    if (p.token == kEosId) break;
  }
  return out;
}

}  // namespace hydec
