#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydec {

using TokenId = int32_t;

// Reserved ids, fixed for every vocabulary.
constexpr TokenId kBosId = 0;
constexpr TokenId kEosId = 1;
constexpr TokenId kUnkId = 2;
constexpr int kNumReservedTokens = 3;

// A sequence of token ids under a shared vocabulary. EOS, when present,
// is the final element.
struct TokenSeq {
  std::vector<TokenId> ids;

  TokenSeq() = default;
  explicit TokenSeq(std::vector<TokenId> v) : ids(std::move(v)) {}

  size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  TokenId back() const { return ids.back(); }
  void push_back(TokenId t) { ids.push_back(t); }
  std::span<const TokenId> view() const { return {ids.data(), ids.size()}; }

  bool operator==(const TokenSeq&) const = default;
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A failure the decode engine may route around (remote call failed,
// backend unavailable). Distinct from programming/contract errors.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& msg) : Error(msg) {}
};

// Malformed, truncated or version-mismatched files.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

constexpr uint64_t kFnvOffset = 1469598103934665603ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), h);
}

inline uint64_t hash_tokens(std::span<const TokenId> ids, uint64_t h = kFnvOffset) {
  return fnv1a64(ids.data(), ids.size() * sizeof(TokenId), h);
}

// splitmix64; used to derive independent per-item seeds from one run seed.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  return mix_seed(seed ^ mix_seed(stream));
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace hydec
