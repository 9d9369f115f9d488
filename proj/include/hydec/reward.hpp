#pragma once

#include <span>
#include <string>
#include <vector>

#include "hydec/common.hpp"
#include "hydec/parallel.hpp"
#include "hydec/synth.hpp"
#include "hydec/vocab.hpp"

namespace hydec {

struct RewardDims {
  int d = 16;  // embedding width
  int k = 4;   // context window (tokens)
  int h = 32;  // hidden units
  int input_dim() const { return (k + 1) * d; }
};

// Per-token scorer: a feed-forward head over the last k context tokens plus
// the candidate token,
//   r = w2 . tanh(W1 [emb(ctx_1..ctx_k) || emb(cand)] + b1) + b2.
// The scorer interface is per-position scalar scoring, so a heavier backbone
// can replace the feed-forward without touching callers.
struct RewardModelParams {
  uint64_t vocab_hash = 0;
  size_t vocab_size = 0;
  RewardDims dims;
  std::vector<double> emb;  // vocab_size x d, row-major
  std::vector<double> w1;   // h x (k+1)d, row-major
  std::vector<double> b1;   // h
  std::vector<double> w2;   // h
  double b2 = 0.0;

  size_t n_params() const {
    return emb.size() + w1.size() + b1.size() + w2.size() + 1;
  }
};

// Deterministic init: embeddings uniform in [-0.1, 0.1]; W1, w2 normal with
// std 1/sqrt(fan_in); biases zero.
RewardModelParams init_reward_params(const Vocab& vocab, RewardDims dims,
                                     uint64_t seed);

// Scores one candidate token given a non-empty context (prompt plus
// generated-so-far). Contexts shorter than k are left-padded with BOS.
double score_token(const RewardModelParams& params,
                   std::span<const TokenId> context, TokenId candidate);

// Mean of score_token over chunk positions, each conditioned on
// prompt || chunk[0..i-1]. The mean makes the rule length-neutral by
// construction: a constant scorer gives the same value for any length.
double chunk_reward(const RewardModelParams& params,
                    std::span<const TokenId> prompt,
                    std::span<const TokenId> chunk);

enum class ChunkAggregation { kMean, kFinalToken };

double chunk_reward_agg(const RewardModelParams& params,
                        std::span<const TokenId> prompt,
                        std::span<const TokenId> chunk, ChunkAggregation agg);

// Pairwise preference loss -log sigmoid(r_w - r_l), computed as
// softplus(-(r_w - r_l)); always >= 0, equals ln 2 iff r_w == r_l, and does
// not overflow at large |r_w - r_l|.
double preference_loss(double r_w, double r_l);

struct RewardGrads {
  std::vector<double> emb, w1, b1, w2;
  double b2 = 0.0;

  void resize_like(const RewardModelParams& p);
  void clear();
  double squared_norm() const;
};

// Mean preference loss over pairs[idx]; when grads is non-null also
// accumulates the analytic gradient of that mean. Per-pair contributions
// are computed independently (possibly in parallel) and reduced in index
// order, so the result is bit-stable for a fixed seed regardless of thread
// count.
double reward_batch_loss(const RewardModelParams& params,
                         const std::vector<ChunkPair>& pairs,
                         std::span<const size_t> idx, ChunkAggregation agg,
                         RewardGrads* grads, const ExecConfig& exec);

struct TrainConfig {
  double lr = 0.05;
  int batch = 256;
  int epochs = 20;
  uint64_t seed = 0;
  RewardDims dims;
  double clip_norm = 5.0;
  double holdout_fraction = 0.1;  // in [0, 0.5]
  ChunkAggregation agg = ChunkAggregation::kMean;
  ExecConfig exec;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double holdout_loss = 0.0;
  double rank_acc = 0.0;       // fraction of holdout pairs with r_w > r_l
  double mean_chosen_r = 0.0;
  double mean_rejected_r = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  size_t train_pairs = 0;
  size_t holdout_pairs = 0;
};

struct EvalStats {
  double mean_loss = 0.0;
  double rank_acc = 0.0;
  double mean_chosen = 0.0;
  double mean_rejected = 0.0;
  size_t n = 0;
};

EvalStats evaluate_reward(const RewardModelParams& params,
                          const std::vector<ChunkPair>& pairs,
                          std::span<const size_t> idx, ChunkAggregation agg,
                          const ExecConfig& exec);

// Minibatch SGD on the mean preference loss with global-norm gradient
// clipping. Deterministic for a fixed (chunks, cfg). Throws on NaN loss,
// naming the offending epoch/batch.
std::pair<RewardModelParams, TrainReport> train_reward(
    const std::vector<ChunkPair>& chunks, const Vocab& vocab,
    const TrainConfig& cfg);

// Persistence ("HYDEC-RM-v1"): dims, vocab hash, row-major little-endian
// f64 tensors. Round-trips bit-exactly.
void save_reward_model(const RewardModelParams& params, const std::string& path);
RewardModelParams load_reward_model(const std::string& path);
// Throws Error("model/vocab mismatch") when the stored hash differs.
RewardModelParams load_reward_model(const std::string& path,
                                    uint64_t expected_vocab_hash);

void write_train_report_jsonl(const TrainReport& report, const std::string& path);

}  // namespace hydec
