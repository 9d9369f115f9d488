#include "hydec/vocab.hpp"

#include <cctype>

namespace hydec {

namespace {

constexpr const char* kBosToken = "<bos>";
constexpr const char* kEosToken = "<eos>";
constexpr const char* kUnkToken = "<unk>";

void append_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t read_u32(const std::string& data, size_t& offset) {
  if (offset + 4 > data.size()) throw FormatError("truncated vocab block");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<unsigned char>(data[offset + i])) << (8 * i);
  offset += 4;
  return v;
}

}  // namespace

std::vector<std::string> Vocab::split_units(std::string_view text,
                                            Granularity granularity) {
  std::vector<std::string> units;
  if (granularity == Granularity::kByte) {
    units.reserve(text.size());
    for (char c : text) units.emplace_back(1, c);
    return units;
  }
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) units.emplace_back(text.substr(start, i - start));
  }
  return units;
}

Vocab Vocab::build(std::string_view corpus, Granularity granularity) {
  auto units = split_units(corpus, granularity);
  if (units.empty()) throw Error("empty corpus");

  Vocab v;
  v.granularity_ = granularity;
  v.tokens_ = {kBosToken, kEosToken, kUnkToken};
  for (auto& u : units) {
    if (v.index_.find(u) == v.index_.end() && u != kBosToken && u != kEosToken &&
        u != kUnkToken) {
      v.index_.emplace(u, static_cast<TokenId>(v.tokens_.size()));
      v.tokens_.push_back(std::move(u));
    }
  }
  v.rebuild_index();
  return v;
}

void Vocab::rebuild_index() {
  index_.clear();
  uint64_t h = kFnvOffset;
  h = fnv1a64(granularity_ == Granularity::kByte ? "byte" : "word", h);
  for (size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], static_cast<TokenId>(i));
    uint32_t len = static_cast<uint32_t>(tokens_[i].size());
    h = fnv1a64(&len, sizeof(len), h);
    h = fnv1a64(tokens_[i], h);
  }
  hash_ = h;
}

TokenId Vocab::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size())
    throw Error("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<size_t>(id)];
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  auto units = split_units(text, granularity_);
  std::vector<TokenId> ids;
  ids.reserve(units.size());
  for (const auto& u : units) ids.push_back(id_of(u));
  return ids;
}

std::vector<TokenId> Vocab::encode_strict(std::string_view text) const {
  auto units = split_units(text, granularity_);
  std::vector<TokenId> ids;
  ids.reserve(units.size());
  for (const auto& u : units) {
    if (!contains(u)) throw Error("vocab mismatch: unknown unit '" + u + "'");
    ids.push_back(id_of(u));
  }
  return ids;
}

std::string Vocab::decode_text(std::span<const TokenId> ids) const {
  std::string out;
  bool first = true;
  for (TokenId id : ids) {
    if (id == kBosId || id == kEosId) continue;
    const std::string& tok = token(id);
    if (granularity_ == Granularity::kWord) {
      if (!first) out.push_back(' ');
      first = false;
    }
    out += tok;
  }
  return out;
}

void Vocab::write(std::string& out) const {
  append_u32(out, granularity_ == Granularity::kByte ? 0u : 1u);
  append_u32(out, static_cast<uint32_t>(tokens_.size()));
  for (const auto& t : tokens_) {
    append_u32(out, static_cast<uint32_t>(t.size()));
    out += t;
  }
}

Vocab Vocab::read(const std::string& data, size_t& offset) {
  Vocab v;
  uint32_t gran = read_u32(data, offset);
  if (gran > 1) throw FormatError("bad vocab granularity flag");
  v.granularity_ = gran == 0 ? Granularity::kByte : Granularity::kWord;
  uint32_t n = read_u32(data, offset);
  if (n < kNumReservedTokens) throw FormatError("vocab too small");
  v.tokens_.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t len = read_u32(data, offset);
    if (offset + len > data.size()) throw FormatError("truncated vocab token");
    v.tokens_.emplace_back(data.substr(offset, len));
    offset += len;
  }
  if (v.tokens_[0] != kBosToken || v.tokens_[1] != kEosToken ||
      v.tokens_[2] != kUnkToken)
    throw FormatError("reserved tokens out of place");
  v.rebuild_index();
  return v;
}

}  // namespace hydec
