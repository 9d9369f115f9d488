#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hydec/common.hpp"

namespace hydec {

// Shared vocabulary for generators, the reward scorer and the decoder.
// Ids are dense in [0, size()); BOS/EOS/UNK occupy 0/1/2.
class Vocab {
 public:
  enum class Granularity { kByte, kWord };

  // Builds a vocab from a corpus: reserved tokens plus every distinct unit
  // in first-occurrence order. Throws Error("empty corpus") when the corpus
  // contains no units.
  static Vocab build(std::string_view corpus, Granularity granularity);

  static std::vector<std::string> split_units(std::string_view text,
                                              Granularity granularity);

  size_t size() const { return tokens_.size(); }
  Granularity granularity() const { return granularity_; }

  // id_of maps unknown units to UNK.
  TokenId id_of(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;

  // Encodes raw text; no BOS/EOS are added.
  std::vector<TokenId> encode(std::string_view text) const;

  // Strict variant: throws Error("vocab mismatch: ...") on unknown units.
  std::vector<TokenId> encode_strict(std::string_view text) const;

  // Renders ids back to text, skipping BOS/EOS.
  std::string decode_text(std::span<const TokenId> ids) const;

  // Content hash; recorded in model files and dataset manifests.
  uint64_t hash() const { return hash_; }

  // (De)serialization as a chunk inside model files.
  void write(std::string& out) const;
  static Vocab read(const std::string& data, size_t& offset);

 private:
  Vocab() = default;
  void rebuild_index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId, std::hash<std::string>,
                     std::equal_to<>>
      index_;
  Granularity granularity_ = Granularity::kWord;
  uint64_t hash_ = 0;
};

}  // namespace hydec
