#include "hydec/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace hydec {

namespace {

constexpr const char kMagic[] = "HYDEC-NGRAM-v1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

template <typename T>
void append_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T read_raw(const std::string& data, size_t& offset) {
  if (offset + sizeof(T) > data.size()) throw FormatError("truncated ngram file");
  T v;
  std::memcpy(&v, data.data() + offset, sizeof(T));
  offset += sizeof(T);
  return v;
}

}  // namespace

NgramModel NgramModel::train(std::span<const TokenId> corpus_tokens, int order,
                             double alpha, const Vocab& vocab) {
  if (order < 1) throw Error("ngram order must be >= 1");
  if (!(alpha > 0.0)) throw Error("ngram alpha must be > 0");
  if (corpus_tokens.size() < static_cast<size_t>(order))
    throw Error("corpus shorter than ngram order");

  NgramModel m;
  m.order_ = order;
  m.alpha_ = alpha;
  m.vocab_ = vocab;

  const size_t ctx_len = static_cast<size_t>(order - 1);
  const size_t n_windows = corpus_tokens.size() - ctx_len;
  for (size_t i = 0; i < n_windows; ++i) {
    std::vector<TokenId> ctx(corpus_tokens.begin() + i,
                             corpus_tokens.begin() + i + ctx_len);
    TokenId next = corpus_tokens[i + ctx_len];
    auto& table = m.tables_[std::move(ctx)];
    table.counts[next] += 1;
    table.total += 1;
  }
  return m;
}

std::vector<TokenId> NgramModel::context_key(
    std::span<const TokenId> prefix) const {
  const size_t ctx_len = static_cast<size_t>(order_ - 1);
  std::vector<TokenId> key(ctx_len, kBosId);
  const size_t take = std::min(prefix.size(), ctx_len);
  for (size_t i = 0; i < take; ++i)
    key[ctx_len - take + i] = prefix[prefix.size() - take + i];
  return key;
}

const NgramModel::CountTable* NgramModel::find_table(
    const std::vector<TokenId>& key) const {
  auto it = tables_.find(key);
  return it == tables_.end() ? nullptr : &it->second;
}

std::vector<double> NgramModel::distribution(
    std::span<const TokenId> prefix) const {
  const size_t v = vocab_.size();
  const CountTable* table = find_table(context_key(prefix));
  const double total = table ? static_cast<double>(table->total) : 0.0;
  const double denom = total + alpha_ * static_cast<double>(v);

  std::vector<double> probs(v, alpha_ / denom);
  if (table) {
    for (const auto& [tok, count] : table->counts)
      probs[static_cast<size_t>(tok)] =
          (static_cast<double>(count) + alpha_) / denom;
  }
  return probs;
}

double NgramModel::prob(std::span<const TokenId> prefix, TokenId next) const {
  if (next < 0 || static_cast<size_t>(next) >= vocab_.size())
    throw Error("token id out of vocab: " + std::to_string(next));
  const CountTable* table = find_table(context_key(prefix));
  const double total = table ? static_cast<double>(table->total) : 0.0;
  const double denom = total + alpha_ * static_cast<double>(vocab_.size());
  uint64_t count = 0;
  if (table) {
    auto it = table->counts.find(next);
    if (it != table->counts.end()) count = it->second;
  }
  return (static_cast<double>(count) + alpha_) / denom;
}

double NgramModel::log_prob(std::span<const TokenId> prefix,
                            TokenId next) const {
  return std::log(prob(prefix, next));
}

void NgramModel::save(const std::string& path) const {
  std::string out;
  out.append(kMagic, kMagicLen);
  append_raw<int32_t>(out, order_);
  append_raw<double>(out, alpha_);
  vocab_.write(out);

  // Contexts and entries are written in sorted order so the file is a pure
  // function of the model content.
  std::vector<const std::vector<TokenId>*> keys;
  keys.reserve(tables_.size());
  for (const auto& kv : tables_) keys.push_back(&kv.first);
  std::sort(keys.begin(), keys.end(),
            [](const auto* a, const auto* b) { return *a < *b; });

  append_raw<uint64_t>(out, keys.size());
  for (const auto* key : keys) {
    for (TokenId t : *key) append_raw<int32_t>(out, t);
    const CountTable& table = tables_.at(*key);
    std::vector<std::pair<TokenId, uint64_t>> entries(table.counts.begin(),
                                                      table.counts.end());
    std::sort(entries.begin(), entries.end());
    append_raw<uint64_t>(out, entries.size());
    for (const auto& [tok, count] : entries) {
      append_raw<int32_t>(out, tok);
      append_raw<uint64_t>(out, count);
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failed: " + path);
}

NgramModel NgramModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());

  if (data.size() < kMagicLen || data.compare(0, kMagicLen, kMagic) != 0)
    throw FormatError("not a HYDEC-NGRAM-v1 file: " + path);
  size_t offset = kMagicLen;

  NgramModel m;
  m.order_ = read_raw<int32_t>(data, offset);
  if (m.order_ < 1) throw FormatError("bad ngram order");
  m.alpha_ = read_raw<double>(data, offset);
  if (!(m.alpha_ > 0.0)) throw FormatError("bad ngram alpha");
  m.vocab_ = Vocab::read(data, offset);

  const size_t ctx_len = static_cast<size_t>(m.order_ - 1);
  uint64_t n_contexts = read_raw<uint64_t>(data, offset);
  for (uint64_t i = 0; i < n_contexts; ++i) {
    std::vector<TokenId> key(ctx_len);
    for (size_t j = 0; j < ctx_len; ++j) key[j] = read_raw<int32_t>(data, offset);
    uint64_t n_entries = read_raw<uint64_t>(data, offset);
    CountTable table;
    for (uint64_t j = 0; j < n_entries; ++j) {
      TokenId tok = read_raw<int32_t>(data, offset);
      uint64_t count = read_raw<uint64_t>(data, offset);
      if (tok < 0 || static_cast<size_t>(tok) >= m.vocab_.size())
        throw FormatError("ngram count entry out of vocab");
      table.counts.emplace(tok, count);
      table.total += count;
    }
    m.tables_.emplace(std::move(key), std::move(table));
  }
  if (offset != data.size()) throw FormatError("trailing bytes in ngram file");
  return m;
}

}  // namespace hydec
