#include "hydec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"

#include "hydec/log.hpp"

namespace hydec {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Uniform integer in [0, n) by rejection; unbiased and portable.
uint64_t uniform_index(std::mt19937_64& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

struct SourcePrompts {
  std::string tag;
  std::vector<std::string> prompts;
};

SourcePrompts load_source(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open prompt source: " + path);
  SourcePrompts src;
  src.tag = std::filesystem::path(path).filename().string();
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '{') {
      // JSONL record with a "prompt" field.
      json rec = json::parse(line, nullptr, false);
      if (!rec.is_discarded() && rec.contains("prompt") &&
          rec["prompt"].is_string()) {
        std::string p = rec["prompt"].get<std::string>();
        if (!p.empty()) src.prompts.push_back(std::move(p));
        continue;
      }
    }
    src.prompts.push_back(line);
  }
  return src;
}

void write_manifest(const std::string& path, ordered_json fields) {
  std::ofstream f(path + ".manifest.json", std::ios::trunc);
  if (!f) throw Error("cannot write manifest for " + path);
  f << fields.dump(2) << "\n";
}

json params_to_json(const SamplingParams& p) {
  ordered_json j;
  j["mode"] = p.mode == SamplingParams::Mode::kGreedy ? "greedy" : "sample";
  j["temperature"] = p.temperature;
  j["top_p"] = p.top_p;
  j["seed"] = p.seed;
  return j;
}

SamplingParams params_from_json(const json& j) {
  SamplingParams p;
  p.mode = j.at("mode").get<std::string>() == "greedy"
               ? SamplingParams::Mode::kGreedy
               : SamplingParams::Mode::kSample;
  p.temperature = j.at("temperature").get<double>();
  p.top_p = j.at("top_p").get<double>();
  p.seed = j.at("seed").get<uint64_t>();
  return p;
}

}  // namespace

PromptSpace build_prompt_space(const std::vector<std::string>& source_paths,
                               size_t n_samples, uint64_t seed) {
  if (source_paths.empty()) throw Error("no prompt sources given");

  std::vector<SourcePrompts> sources;
  size_t total = 0;
  for (const auto& path : source_paths) {
    sources.push_back(load_source(path));
    total += sources.back().prompts.size();
  }
  if (total == 0) throw Error("prompt sources contain zero prompts");

  // Proportional allocation, largest remainder for the leftover slots.
  const size_t k = sources.size();
  std::vector<size_t> alloc(k, 0);
  std::vector<std::pair<double, size_t>> remainders;
  size_t assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    const double share = static_cast<double>(n_samples) *
                         static_cast<double>(sources[i].prompts.size()) /
                         static_cast<double>(total);
    alloc[i] = static_cast<size_t>(share);
    assigned += alloc[i];
    remainders.push_back({share - std::floor(share), i});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (size_t j = 0; assigned < n_samples; ++j, ++assigned)
    alloc[remainders[j % k].second] += 1;

  PromptSpace space;
  space.total_available = total;

  std::mt19937_64 rng(mix_seed(seed));
  for (size_t i = 0; i < k; ++i) {
    auto& src = sources[i];
    const size_t want = alloc[i];
    if (want == 0) continue;
    std::vector<size_t> picks;
    if (want <= src.prompts.size()) {
      // Partial Fisher-Yates for a without-replacement sample.
      std::vector<size_t> idx(src.prompts.size());
      for (size_t j = 0; j < idx.size(); ++j) idx[j] = j;
      for (size_t j = 0; j < want; ++j) {
        const size_t swap_with =
            j + static_cast<size_t>(uniform_index(rng, idx.size() - j));
        std::swap(idx[j], idx[swap_with]);
        picks.push_back(idx[j]);
      }
    } else {
      space.sampled_with_replacement = true;
      log_warn("prompt source '" + src.tag + "' has " +
               std::to_string(src.prompts.size()) + " prompts, need " +
               std::to_string(want) + "; sampling with replacement");
      for (size_t j = 0; j < want; ++j)
        picks.push_back(static_cast<size_t>(uniform_index(rng, src.prompts.size())));
    }
    for (size_t pick : picks) {
      PromptRecord rec;
      rec.id = src.tag + ":" + std::to_string(pick) + ":" +
               std::to_string(space.prompts.size());
      rec.prompt = src.prompts[pick];
      rec.source_tag = src.tag;
      space.prompts.push_back(std::move(rec));
    }
  }
  return space;
}

GenPairsResult gen_pairs(const std::vector<PromptRecord>& prompts,
                         const GenBackend& slm, const GenBackend& llm,
                         const GenPairsOptions& opts) {
  if (!(opts.temp_lo > 0.0) || opts.temp_lo > opts.temp_hi)
    throw Error("bad temperature range");
  if (!(opts.top_p_lo > 0.0) || opts.top_p_lo > opts.top_p_hi ||
      opts.top_p_hi > 1.0)
    throw Error("bad top_p range");
  if (slm.vocab().hash() != llm.vocab().hash())
    throw Error("model/vocab mismatch between SLM and LLM backends");

  const Vocab& vocab = slm.vocab();

  struct Slot {
    bool ok = false;
    bool empty_side = false;
    bool failed = false;
    ResponsePair pair;
  };
  std::vector<Slot> slots(prompts.size());

  parallel_index_for(prompts.size(), opts.exec, [&](size_t i) {
    Slot& slot = slots[i];
    try {
      // Params are derived from (seed, index) so duplicates of one prompt
      // and any execution order give the same artifact.
      std::mt19937_64 rng(derive_seed(opts.seed, i));
      SamplingParams slm_params, llm_params;
      if (opts.greedy) {
        slm_params.mode = llm_params.mode = SamplingParams::Mode::kGreedy;
      } else {
        slm_params.mode = llm_params.mode = SamplingParams::Mode::kSample;
        slm_params.temperature = uniform_range(rng, opts.temp_lo, opts.temp_hi);
        slm_params.top_p = uniform_range(rng, opts.top_p_lo, opts.top_p_hi);
        llm_params.temperature = uniform_range(rng, opts.temp_lo, opts.temp_hi);
        llm_params.top_p = uniform_range(rng, opts.top_p_lo, opts.top_p_hi);
        slm_params.seed = rng();
        llm_params.seed = rng();
      }

      std::vector<TokenId> prompt_ids = vocab.encode(prompts[i].prompt);
      std::vector<TokenId> prefix;
      prefix.reserve(prompt_ids.size() + 1);
      prefix.push_back(kBosId);
      prefix.insert(prefix.end(), prompt_ids.begin(), prompt_ids.end());

      TokenSeq rejected = generate(slm, prefix, slm_params, opts.max_tokens);
      TokenSeq chosen = generate(llm, prefix, llm_params, opts.max_tokens);
      if (chosen.empty() || rejected.empty()) {
        slot.empty_side = true;
        return;
      }

      slot.pair.pair_id = prompts[i].id + "#" + std::to_string(i);
      slot.pair.prompt = TokenSeq(std::move(prompt_ids));
      slot.pair.chosen = std::move(chosen);
      slot.pair.rejected = std::move(rejected);
      slot.pair.slm_params = slm_params;
      slot.pair.llm_params = llm_params;
      slot.ok = true;
    } catch (const std::exception& e) {
      slot.failed = true;
      log_warn("gen_pairs: prompt '" + prompts[i].id + "' failed: " + e.what());
    }
  });

  GenPairsResult result;
  for (auto& slot : slots) {
    if (slot.ok)
      result.pairs.push_back(std::move(slot.pair));
    else if (slot.empty_side)
      result.dropped_empty += 1;
    else if (slot.failed)
      result.failed_prompts += 1;
  }
  if (result.dropped_empty > 0)
    log_warn("gen_pairs: dropped " + std::to_string(result.dropped_empty) +
             " pairs with an empty side");
  return result;
}

ChunkResult chunk_pairs(const std::vector<ResponsePair>& pairs,
                        const ChunkOptions& opts) {
  if (opts.chunks_per_pair < 1) throw Error("chunks_per_pair must be >= 1");

  ChunkResult result;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    const size_t m = std::min(pair.chosen.size(), pair.rejected.size());
    if (m == 0) {
      result.skipped_pairs += 1;
      continue;
    }

    std::mt19937_64 rng(derive_seed(opts.seed, i));
    std::vector<int> lengths;
    lengths.reserve(static_cast<size_t>(opts.chunks_per_pair));
    if (opts.force_extremes && opts.chunks_per_pair >= 2) {
      lengths.push_back(1);
      lengths.push_back(static_cast<int>(m));
    }
    while (lengths.size() < static_cast<size_t>(opts.chunks_per_pair))
      lengths.push_back(1 + static_cast<int>(uniform_index(rng, m)));

    for (size_t c = 0; c < lengths.size(); ++c) {
      const int len = lengths[c];
      ChunkPair chunk;
      chunk.pair_id = pair.pair_id;
      chunk.prompt = pair.prompt;
      chunk.chosen_chunk =
          TokenSeq({pair.chosen.ids.begin(), pair.chosen.ids.begin() + len});
      chunk.rejected_chunk =
          TokenSeq({pair.rejected.ids.begin(), pair.rejected.ids.begin() + len});
      chunk.chunk_len = len;
      result.chunks.push_back(std::move(chunk));
    }
  }
  return result;
}

// --- JSONL artifacts -------------------------------------------------------

void write_prompts_jsonl(const std::string& path, const PromptSpace& space) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  for (const auto& rec : space.prompts) {
    ordered_json j;
    j["id"] = rec.id;
    j["prompt"] = rec.prompt;
    j["source_tag"] = rec.source_tag;
    f << j.dump() << "\n";
  }
  ordered_json manifest;
  manifest["file"] = std::filesystem::path(path).filename().string();
  manifest["records"] = space.prompts.size();
  manifest["total_available"] = space.total_available;
  manifest["sampled_with_replacement"] = space.sampled_with_replacement;
  write_manifest(path, manifest);
}

std::vector<PromptRecord> read_prompts_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  std::vector<PromptRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    out.push_back({j.at("id").get<std::string>(),
                   j.at("prompt").get<std::string>(),
                   j.at("source_tag").get<std::string>()});
  }
  return out;
}

void write_pairs_jsonl(const std::string& path, const GenPairsResult& result,
                       const Vocab& vocab) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  for (const auto& pair : result.pairs) {
    ordered_json j;
    j["pair_id"] = pair.pair_id;
    j["prompt_ids"] = pair.prompt.ids;
    j["chosen_ids"] = pair.chosen.ids;
    j["rejected_ids"] = pair.rejected.ids;
    j["slm_params"] = params_to_json(pair.slm_params);
    j["llm_params"] = params_to_json(pair.llm_params);
    f << j.dump() << "\n";
  }
  ordered_json manifest;
  manifest["file"] = std::filesystem::path(path).filename().string();
  manifest["vocab_hash"] = hex64(vocab.hash());
  manifest["records"] = result.pairs.size();
  manifest["dropped_empty"] = result.dropped_empty;
  manifest["failed_prompts"] = result.failed_prompts;
  write_manifest(path, manifest);
}

std::vector<ResponsePair> read_pairs_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  std::vector<ResponsePair> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    ResponsePair pair;
    pair.pair_id = j.at("pair_id").get<std::string>();
    pair.prompt = TokenSeq(j.at("prompt_ids").get<std::vector<TokenId>>());
    pair.chosen = TokenSeq(j.at("chosen_ids").get<std::vector<TokenId>>());
    pair.rejected = TokenSeq(j.at("rejected_ids").get<std::vector<TokenId>>());
    pair.slm_params = params_from_json(j.at("slm_params"));
    pair.llm_params = params_from_json(j.at("llm_params"));
    out.push_back(std::move(pair));
  }
  return out;
}

void write_chunks_jsonl(const std::string& path, const ChunkResult& result,
                        const Vocab& vocab) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  for (const auto& chunk : result.chunks) {
    if (chunk.chosen_chunk.size() != chunk.rejected_chunk.size())
      throw Error("chunk invariant violated: unequal lengths");
    ordered_json j;
    j["pair_id"] = chunk.pair_id;
    j["prompt_ids"] = chunk.prompt.ids;
    j["chosen_ids"] = chunk.chosen_chunk.ids;
    j["rejected_ids"] = chunk.rejected_chunk.ids;
    j["chunk_len"] = chunk.chunk_len;
    f << j.dump() << "\n";
  }
  ordered_json manifest;
  manifest["file"] = std::filesystem::path(path).filename().string();
  manifest["vocab_hash"] = hex64(vocab.hash());
  manifest["records"] = result.chunks.size();
  manifest["skipped_pairs"] = result.skipped_pairs;
  write_manifest(path, manifest);
}

std::vector<ChunkPair> read_chunks_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  std::vector<ChunkPair> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    ChunkPair chunk;
    chunk.pair_id = j.at("pair_id").get<std::string>();
    chunk.prompt = TokenSeq(j.at("prompt_ids").get<std::vector<TokenId>>());
    chunk.chosen_chunk = TokenSeq(j.at("chosen_ids").get<std::vector<TokenId>>());
    chunk.rejected_chunk =
        TokenSeq(j.at("rejected_ids").get<std::vector<TokenId>>());
    chunk.chunk_len = j.at("chunk_len").get<int>();
    out.push_back(std::move(chunk));
  }
  return out;
}

}  // namespace hydec
