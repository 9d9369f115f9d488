#pragma once

#include <string>
#include <vector>

#include "hydec/backend.hpp"
#include "hydec/parallel.hpp"

namespace hydec {

struct PromptRecord {
  std::string id;
  std::string prompt;
  std::string source_tag;
};

struct PromptSpace {
  std::vector<PromptRecord> prompts;
  size_t total_available = 0;
  bool sampled_with_replacement = false;
};

// Samples n prompts from text (one prompt per line) or JSONL ("prompt" field)
// sources, stratified proportionally across sources, without replacement
// when possible. Falls back to sampling with replacement (and warns) when a
// source cannot cover its share. Deterministic under seed.
PromptSpace build_prompt_space(const std::vector<std::string>& source_paths,
                               size_t n_samples, uint64_t seed);

struct ResponsePair {
  std::string pair_id;
  TokenSeq prompt;    // encoded under the shared vocab, no BOS/EOS
  TokenSeq chosen;    // LLM response
  TokenSeq rejected;  // SLM response
  SamplingParams slm_params;
  SamplingParams llm_params;
};

struct GenPairsOptions {
  int max_tokens = 32;
  double temp_lo = 0.3, temp_hi = 1.2;
  double top_p_lo = 0.7, top_p_hi = 1.0;
  bool greedy = false;  // degenerate mode: ignore ranges, greedy both sides
  uint64_t seed = 0;
  ExecConfig exec;
};

struct GenPairsResult {
  std::vector<ResponsePair> pairs;
  size_t dropped_empty = 0;
  size_t failed_prompts = 0;
};

// For each prompt draws per-side (temperature, top_p) uniformly from the
// ranges, generates one SLM and one LLM response, and records the params
// used. Prompts are processed independently (possibly concurrently); output
// order always matches input order. Per-prompt backend failures are counted
// and skipped.
GenPairsResult gen_pairs(const std::vector<PromptRecord>& prompts,
                         const GenBackend& slm, const GenBackend& llm,
                         const GenPairsOptions& opts);

struct ChunkPair {
  std::string pair_id;
  TokenSeq prompt;
  TokenSeq chosen_chunk;
  TokenSeq rejected_chunk;
  int chunk_len = 0;
};

struct ChunkOptions {
  int chunks_per_pair = 3;
  bool force_extremes = true;  // guarantee lengths 1 and m when >= 2 chunks
  uint64_t seed = 0;
};

struct ChunkResult {
  std::vector<ChunkPair> chunks;
  size_t skipped_pairs = 0;
};

// Expands each pair into chunks_per_pair equal-length prefix chunks with
// lengths drawn uniformly from [1, m], m = min(|chosen|, |rejected|). With
// force_extremes and >= 2 chunks per pair, lengths 1 and m are always
// present, so single-token and full-length chunks are covered for every
// pair.
ChunkResult chunk_pairs(const std::vector<ResponsePair>& pairs,
                        const ChunkOptions& opts);

// --- JSONL artifacts -------------------------------------------------------
// Every writer also emits <path>.manifest.json recording the vocab hash and
// counters, and writes LF-terminated UTF-8 lines.

void write_prompts_jsonl(const std::string& path, const PromptSpace& space);
std::vector<PromptRecord> read_prompts_jsonl(const std::string& path);

void write_pairs_jsonl(const std::string& path, const GenPairsResult& result,
                       const Vocab& vocab);
std::vector<ResponsePair> read_pairs_jsonl(const std::string& path);

void write_chunks_jsonl(const std::string& path, const ChunkResult& result,
                        const Vocab& vocab);
std::vector<ChunkPair> read_chunks_jsonl(const std::string& path);

}  // namespace hydec
