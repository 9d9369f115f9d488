#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hydec/common.hpp"
#include "hydec/vocab.hpp"

namespace hydec {

// Add-alpha smoothed n-gram model; the desk-scale generator surrogate.
// Immutable after training. P(t|c) = (count(c,t) + a) / (count(c,.) + a|V|);
// unseen contexts are uniform.
class NgramModel {
 public:
  // Requires order >= 1, alpha > 0 and |corpus| >= order.
  static NgramModel train(std::span<const TokenId> corpus_tokens, int order,
                          double alpha, const Vocab& vocab);

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  const Vocab& vocab() const { return vocab_; }

  // Dense conditional distribution over the next token. The context is the
  // last (order-1) tokens of `prefix`, left-padded with BOS when shorter.
  std::vector<double> distribution(std::span<const TokenId> prefix) const;

  double prob(std::span<const TokenId> prefix, TokenId next) const;
  double log_prob(std::span<const TokenId> prefix, TokenId next) const;

  // Persistence ("HYDEC-NGRAM-v1"). Round-trips bit-exactly.
  void save(const std::string& path) const;
  static NgramModel load(const std::string& path);

  size_t context_count() const { return tables_.size(); }

 private:
  NgramModel() = default;

  struct CountTable {
    uint64_t total = 0;
    std::unordered_map<TokenId, uint64_t> counts;
  };

  struct ContextHash {
    size_t operator()(const std::vector<TokenId>& c) const {
      return static_cast<size_t>(
          fnv1a64(c.data(), c.size() * sizeof(TokenId)));
    }
  };

  std::vector<TokenId> context_key(std::span<const TokenId> prefix) const;
  const CountTable* find_table(const std::vector<TokenId>& key) const;

  int order_ = 1;
  double alpha_ = 0.5;
  Vocab vocab_;
  std::unordered_map<std::vector<TokenId>, CountTable, ContextHash> tables_;
};

}  // namespace hydec
