#include "hydec/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "hydec/log.hpp"

namespace hydec {

namespace {

constexpr const char kMagic[] = "HYDEC-RM-v1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; std::normal_distribution is implementation-defined.
double standard_normal(std::mt19937_64& rng) {
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Fills the (k+1)d feature vector for one position and records the token id
// feeding each embedding segment (context window left-padded with BOS).
void gather_features(const RewardModelParams& p, std::span<const TokenId> context,
                     TokenId candidate, std::vector<double>& features,
                     std::vector<TokenId>& segment_tokens) {
  const int d = p.dims.d;
  const int k = p.dims.k;
  segment_tokens.assign(static_cast<size_t>(k) + 1, kBosId);
  for (int s = 0; s < k; ++s) {
    const int back = k - s;  // segment s holds the token `back` from the end
    if (static_cast<size_t>(back) <= context.size())
      segment_tokens[static_cast<size_t>(s)] = context[context.size() - back];
  }
  segment_tokens[static_cast<size_t>(k)] = candidate;

  features.resize(static_cast<size_t>(p.dims.input_dim()));
  for (int s = 0; s <= k; ++s) {
    const TokenId tok = segment_tokens[static_cast<size_t>(s)];
    if (tok < 0 || static_cast<size_t>(tok) >= p.vocab_size)
      throw Error("token id out of vocab: " + std::to_string(tok));
    const double* row = p.emb.data() + static_cast<size_t>(tok) * d;
    std::copy(row, row + d, features.begin() + static_cast<size_t>(s) * d);
  }
}

struct ForwardState {
  std::vector<double> features;
  std::vector<TokenId> segment_tokens;
  std::vector<double> activations;  // tanh(z)
};

double forward_position(const RewardModelParams& p, std::span<const TokenId> context,
                        TokenId candidate, ForwardState& st) {
  gather_features(p, context, candidate, st.features, st.segment_tokens);
  const int in = p.dims.input_dim();
  const int h = p.dims.h;
  st.activations.resize(static_cast<size_t>(h));
  double r = p.b2;
  for (int row = 0; row < h; ++row) {
    const double* w = p.w1.data() + static_cast<size_t>(row) * in;
    double z = p.b1[static_cast<size_t>(row)];
    for (int c = 0; c < in; ++c) z += w[c] * st.features[static_cast<size_t>(c)];
    const double a = std::tanh(z);
    st.activations[static_cast<size_t>(row)] = a;
    r += p.w2[static_cast<size_t>(row)] * a;
  }
  return r;
}

// Accumulates d(upstream * r) / d(params) for one position into grads.
// Requires the ForwardState of the matching forward pass.
void backward_position(const RewardModelParams& p, const ForwardState& st,
                       double upstream, RewardGrads& grads) {
  const int in = p.dims.input_dim();
  const int h = p.dims.h;
  const int d = p.dims.d;

  grads.b2 += upstream;
  std::vector<double> dfeatures(static_cast<size_t>(in), 0.0);
  for (int row = 0; row < h; ++row) {
    const double a = st.activations[static_cast<size_t>(row)];
    grads.w2[static_cast<size_t>(row)] += upstream * a;
    const double dz = upstream * p.w2[static_cast<size_t>(row)] * (1.0 - a * a);
    grads.b1[static_cast<size_t>(row)] += dz;
    const double* w = p.w1.data() + static_cast<size_t>(row) * in;
    double* gw = grads.w1.data() + static_cast<size_t>(row) * in;
    for (int c = 0; c < in; ++c) {
      gw[c] += dz * st.features[static_cast<size_t>(c)];
      dfeatures[static_cast<size_t>(c)] += dz * w[c];
    }
  }
  for (size_t s = 0; s < st.segment_tokens.size(); ++s) {
    const TokenId tok = st.segment_tokens[s];
    double* ge = grads.emb.data() + static_cast<size_t>(tok) * d;
    const double* df = dfeatures.data() + s * d;
    for (int j = 0; j < d; ++j) ge[j] += df[j];
  }
}

// One side of a pair: reward under the aggregation rule, with optional
// backprop of `upstream * dR/dparams`.
double side_reward(const RewardModelParams& p, std::span<const TokenId> prompt,
                   std::span<const TokenId> chunk, ChunkAggregation agg,
                   double upstream, RewardGrads* grads) {
  if (chunk.empty()) throw Error("chunk_reward: empty chunk");

  std::vector<TokenId> context(prompt.begin(), prompt.end());
  ForwardState st;
  double total = 0.0;
  const size_t n = chunk.size();
  for (size_t i = 0; i < n; ++i) {
    const double r = forward_position(p, context, chunk[i], st);
    const bool counts = agg == ChunkAggregation::kMean || i + 1 == n;
    if (counts) {
      total += r;
      if (grads) {
        const double scale =
            agg == ChunkAggregation::kMean ? upstream / static_cast<double>(n)
                                           : upstream;
        backward_position(p, st, scale, *grads);
      }
    }
    context.push_back(chunk[i]);
  }
  return agg == ChunkAggregation::kMean ? total / static_cast<double>(n) : total;
}

}  // namespace

RewardModelParams init_reward_params(const Vocab& vocab, RewardDims dims,
                                     uint64_t seed) {
  if (dims.d < 1 || dims.k < 1 || dims.h < 1) throw Error("bad reward dims");
  RewardModelParams p;
  p.vocab_hash = vocab.hash();
  p.vocab_size = vocab.size();
  p.dims = dims;
  p.emb.resize(p.vocab_size * static_cast<size_t>(dims.d));
  p.w1.resize(static_cast<size_t>(dims.h) * dims.input_dim());
  p.b1.assign(static_cast<size_t>(dims.h), 0.0);
  p.w2.resize(static_cast<size_t>(dims.h));
  p.b2 = 0.0;

  std::mt19937_64 rng(mix_seed(seed));
  for (auto& e : p.emb) e = -0.1 + 0.2 * uniform01(rng);
  const double w1_std = 1.0 / std::sqrt(static_cast<double>(dims.input_dim()));
  for (auto& w : p.w1) w = w1_std * standard_normal(rng);
  const double w2_std = 1.0 / std::sqrt(static_cast<double>(dims.h));
  for (auto& w : p.w2) w = w2_std * standard_normal(rng);
  return p;
}

double score_token(const RewardModelParams& params,
                   std::span<const TokenId> context, TokenId candidate) {
  if (context.empty()) throw Error("score_token: empty context");
  if (candidate < 0 || static_cast<size_t>(candidate) >= params.vocab_size)
    throw Error("candidate out of vocab: " + std::to_string(candidate));
  ForwardState st;
  return forward_position(params, context, candidate, st);
}

double chunk_reward(const RewardModelParams& params,
                    std::span<const TokenId> prompt,
                    std::span<const TokenId> chunk) {
  return side_reward(params, prompt, chunk, ChunkAggregation::kMean, 0.0, nullptr);
}

double chunk_reward_agg(const RewardModelParams& params,
                        std::span<const TokenId> prompt,
                        std::span<const TokenId> chunk, ChunkAggregation agg) {
  return side_reward(params, prompt, chunk, agg, 0.0, nullptr);
}

double preference_loss(double r_w, double r_l) {
  if (!std::isfinite(r_w) || !std::isfinite(r_l))
    throw Error("preference_loss: non-finite reward");
  return softplus(-(r_w - r_l));
}

void RewardGrads::resize_like(const RewardModelParams& p) {
  emb.assign(p.emb.size(), 0.0);
  w1.assign(p.w1.size(), 0.0);
  b1.assign(p.b1.size(), 0.0);
  w2.assign(p.w2.size(), 0.0);
  b2 = 0.0;
}

void RewardGrads::clear() {
  std::fill(emb.begin(), emb.end(), 0.0);
  std::fill(w1.begin(), w1.end(), 0.0);
  std::fill(b1.begin(), b1.end(), 0.0);
  std::fill(w2.begin(), w2.end(), 0.0);
  b2 = 0.0;
}

double RewardGrads::squared_norm() const {
  auto sq = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
  };
  return sq(emb) + sq(w1) + sq(b1) + sq(w2) + b2 * b2;
}

double reward_batch_loss(const RewardModelParams& params,
                         const std::vector<ChunkPair>& pairs,
                         std::span<const size_t> idx, ChunkAggregation agg,
                         RewardGrads* grads, const ExecConfig& exec) {
  if (idx.empty()) throw Error("empty batch");

  struct PairResult {
    double loss = 0.0;
    RewardGrads grads;
    bool has_grads = false;
  };
  std::vector<PairResult> results(idx.size());
  const double inv_n = 1.0 / static_cast<double>(idx.size());

  parallel_index_for(idx.size(), exec, [&](size_t i) {
    const ChunkPair& pair = pairs[idx[i]];
    PairResult& res = results[i];
    // Two passes: rewards first (the loss derivative needs both), then
    // backprop with the pair's upstream gradients.
    const double r_w =
        side_reward(params, pair.prompt.view(), pair.chosen_chunk.view(), agg,
                    0.0, nullptr);
    const double r_l =
        side_reward(params, pair.prompt.view(), pair.rejected_chunk.view(), agg,
                    0.0, nullptr);
    res.loss = preference_loss(r_w, r_l);
    if (grads) {
      const double dloss_ddelta = -sigmoid(-(r_w - r_l));
      res.grads.resize_like(params);
      res.has_grads = true;
      side_reward(params, pair.prompt.view(), pair.chosen_chunk.view(), agg,
                  dloss_ddelta * inv_n, &res.grads);
      side_reward(params, pair.prompt.view(), pair.rejected_chunk.view(), agg,
                  -dloss_ddelta * inv_n, &res.grads);
    }
  });

  // Index-order reduction keeps the result independent of thread count.
  double loss = 0.0;
  for (size_t i = 0; i < results.size(); ++i) {
    loss += results[i].loss;
    if (grads && results[i].has_grads) {
      const RewardGrads& g = results[i].grads;
      for (size_t j = 0; j < g.emb.size(); ++j) grads->emb[j] += g.emb[j];
      for (size_t j = 0; j < g.w1.size(); ++j) grads->w1[j] += g.w1[j];
      for (size_t j = 0; j < g.b1.size(); ++j) grads->b1[j] += g.b1[j];
      for (size_t j = 0; j < g.w2.size(); ++j) grads->w2[j] += g.w2[j];
      grads->b2 += g.b2;
    }
  }
  return loss * inv_n;
}

EvalStats evaluate_reward(const RewardModelParams& params,
                          const std::vector<ChunkPair>& pairs,
                          std::span<const size_t> idx, ChunkAggregation agg,
                          const ExecConfig& exec) {
  EvalStats stats;
  stats.n = idx.size();
  if (idx.empty()) return stats;

  struct Row {
    double loss, r_w, r_l;
  };
  std::vector<Row> rows(idx.size());
  parallel_index_for(idx.size(), exec, [&](size_t i) {
    const ChunkPair& pair = pairs[idx[i]];
    const double r_w = chunk_reward_agg(params, pair.prompt.view(),
                                        pair.chosen_chunk.view(), agg);
    const double r_l = chunk_reward_agg(params, pair.prompt.view(),
                                        pair.rejected_chunk.view(), agg);
    rows[i] = {preference_loss(r_w, r_l), r_w, r_l};
  });

  size_t correct = 0;
  for (const auto& row : rows) {
    stats.mean_loss += row.loss;
    stats.mean_chosen += row.r_w;
    stats.mean_rejected += row.r_l;
    if (row.r_w > row.r_l) ++correct;
  }
  const double n = static_cast<double>(idx.size());
  stats.mean_loss /= n;
  stats.mean_chosen /= n;
  stats.mean_rejected /= n;
  stats.rank_acc = static_cast<double>(correct) / n;
  return stats;
}

std::pair<RewardModelParams, TrainReport> train_reward(
    const std::vector<ChunkPair>& chunks, const Vocab& vocab,
    const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw Error("learning rate must be > 0");
  if (cfg.batch < 1) throw Error("batch size must be >= 1");
  if (cfg.holdout_fraction < 0.0 || cfg.holdout_fraction > 0.5)
    throw Error("holdout fraction must be in [0, 0.5]");
  if (chunks.empty()) throw Error("empty training set");

  // Holdout split first, then training; both seeded.
  std::vector<size_t> order(chunks.size());
  std::iota(order.begin(), order.end(), size_t{0});
  {
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x5eed5p117));
    std::shuffle(order.begin(), order.end(), rng);
  }
  const size_t n_holdout =
      static_cast<size_t>(cfg.holdout_fraction * static_cast<double>(chunks.size()));
  std::vector<size_t> holdout_idx(order.begin(), order.begin() + n_holdout);
  std::vector<size_t> train_idx(order.begin() + n_holdout, order.end());
  if (train_idx.empty()) throw Error("empty training set after holdout split");

  RewardModelParams params = init_reward_params(vocab, cfg.dims, cfg.seed);
  RewardGrads grads;
  grads.resize_like(params);

  TrainReport report;
  report.train_pairs = train_idx.size();
  report.holdout_pairs = holdout_idx.size();

  const std::span<const size_t> metric_idx =
      holdout_idx.empty() ? std::span<const size_t>(train_idx)
                          : std::span<const size_t>(holdout_idx);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    {
      std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + static_cast<uint64_t>(epoch)));
      std::shuffle(train_idx.begin(), train_idx.end(), rng);
    }

    double epoch_loss = 0.0;
    size_t epoch_pairs = 0;
    const size_t batch = static_cast<size_t>(cfg.batch);
    for (size_t start = 0, b = 0; start < train_idx.size(); start += batch, ++b) {
      const size_t len = std::min(batch, train_idx.size() - start);
      grads.clear();
      const double loss =
          reward_batch_loss(params, chunks, {train_idx.data() + start, len},
                            cfg.agg, &grads, cfg.exec);
      if (!std::isfinite(loss))
        throw Error("NaN loss in epoch " + std::to_string(epoch) + " batch " +
                    std::to_string(b));
      epoch_loss += loss * static_cast<double>(len);
      epoch_pairs += len;

      double scale = cfg.lr;
      if (cfg.clip_norm > 0.0) {
        const double norm = std::sqrt(grads.squared_norm());
        if (norm > cfg.clip_norm) scale *= cfg.clip_norm / norm;
      }
      for (size_t j = 0; j < params.emb.size(); ++j)
        params.emb[j] -= scale * grads.emb[j];
      for (size_t j = 0; j < params.w1.size(); ++j)
        params.w1[j] -= scale * grads.w1[j];
      for (size_t j = 0; j < params.b1.size(); ++j)
        params.b1[j] -= scale * grads.b1[j];
      for (size_t j = 0; j < params.w2.size(); ++j)
        params.w2[j] -= scale * grads.w2[j];
      params.b2 -= scale * grads.b2;
    }

    for (double v : params.emb)
      if (!std::isfinite(v)) throw Error("non-finite parameter after epoch " +
                                         std::to_string(epoch));

    const EvalStats holdout =
        evaluate_reward(params, chunks, metric_idx, cfg.agg, cfg.exec);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(epoch_pairs);
    stats.holdout_loss = holdout.mean_loss;
    stats.rank_acc = holdout.rank_acc;
    stats.mean_chosen_r = holdout.mean_chosen;
    stats.mean_rejected_r = holdout.mean_rejected;
    report.epochs.push_back(stats);
    log_info("reward train epoch " + std::to_string(epoch) + ": loss=" +
             std::to_string(stats.train_loss) + " holdout_loss=" +
             std::to_string(stats.holdout_loss) + " rank_acc=" +
             std::to_string(stats.rank_acc));
  }
  return {std::move(params), std::move(report)};
}

namespace {

template <typename T>
void append_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T read_raw(const std::string& data, size_t& offset) {
  if (offset + sizeof(T) > data.size())
    throw FormatError("truncated reward model file");
  T v;
  std::memcpy(&v, data.data() + offset, sizeof(T));
  offset += sizeof(T);
  return v;
}

void append_tensor(std::string& out, const std::vector<double>& t) {
  append_raw<uint64_t>(out, t.size());
  out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
}

std::vector<double> read_tensor(const std::string& data, size_t& offset,
                                size_t expected) {
  const uint64_t n = read_raw<uint64_t>(data, offset);
  if (n != expected) throw FormatError("reward model tensor size mismatch");
  if (offset + n * sizeof(double) > data.size())
    throw FormatError("truncated reward model file");
  std::vector<double> t(n);
  std::memcpy(t.data(), data.data() + offset, n * sizeof(double));
  offset += n * sizeof(double);
  return t;
}

}  // namespace

void save_reward_model(const RewardModelParams& params, const std::string& path) {
  std::string out;
  out.append(kMagic, kMagicLen);
  append_raw<uint64_t>(out, params.vocab_hash);
  append_raw<uint64_t>(out, params.vocab_size);
  append_raw<int32_t>(out, params.dims.d);
  append_raw<int32_t>(out, params.dims.k);
  append_raw<int32_t>(out, params.dims.h);
  append_tensor(out, params.emb);
  append_tensor(out, params.w1);
  append_tensor(out, params.b1);
  append_tensor(out, params.w2);
  append_raw<double>(out, params.b2);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failed: " + path);
}

RewardModelParams load_reward_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (data.size() < kMagicLen || data.compare(0, kMagicLen, kMagic) != 0)
    throw FormatError("not a HYDEC-RM-v1 file: " + path);
  size_t offset = kMagicLen;

  RewardModelParams p;
  p.vocab_hash = read_raw<uint64_t>(data, offset);
  p.vocab_size = read_raw<uint64_t>(data, offset);
  p.dims.d = read_raw<int32_t>(data, offset);
  p.dims.k = read_raw<int32_t>(data, offset);
  p.dims.h = read_raw<int32_t>(data, offset);
  if (p.dims.d < 1 || p.dims.k < 1 || p.dims.h < 1 || p.vocab_size == 0)
    throw FormatError("bad reward model dims");
  p.emb = read_tensor(data, offset, p.vocab_size * static_cast<size_t>(p.dims.d));
  p.w1 = read_tensor(data, offset,
                     static_cast<size_t>(p.dims.h) * p.dims.input_dim());
  p.b1 = read_tensor(data, offset, static_cast<size_t>(p.dims.h));
  p.w2 = read_tensor(data, offset, static_cast<size_t>(p.dims.h));
  p.b2 = read_raw<double>(data, offset);
  if (offset != data.size())
    throw FormatError("trailing bytes in reward model file");
  return p;
}

RewardModelParams load_reward_model(const std::string& path,
                                    uint64_t expected_vocab_hash) {
  RewardModelParams p = load_reward_model(path);
  if (p.vocab_hash != expected_vocab_hash) throw Error("model/vocab mismatch");
  return p;
}

void write_train_report_jsonl(const TrainReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  for (const auto& e : report.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["holdout_loss"] = e.holdout_loss;
    j["rank_acc"] = e.rank_acc;
    j["mean_chosen_r"] = e.mean_chosen_r;
    j["mean_rejected_r"] = e.mean_rejected_r;
    f << j.dump() << "\n";
  }
}

}  // namespace hydec
