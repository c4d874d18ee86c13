#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "util/coding.h"

namespace alsm {

using SequenceNumber = uint64_t;

// Sequence numbers share a 64-bit tag with the record kind, leaving 56 bits.
inline constexpr SequenceNumber kMaxSequenceNumber = (uint64_t{1} << 56) - 1;

enum class ValueKind : uint8_t { kDelete = 0, kPut = 1 };

// Identity of an on-disk file (SST or WAL segment). Never reused.
struct FileId {
  uint64_t value = 0;
  friend auto operator<=>(const FileId&, const FileId&) = default;
};

// Compaction or flush epoch. Epoch 0 means "created by a flush".
struct EpochId {
  uint64_t value = 0;
  friend auto operator<=>(const EpochId&, const EpochId&) = default;
};

// Decoded form of an internal key. user_key is a view; the owner must outlive it.
struct ParsedInternalKey {
  std::string_view user_key;
  SequenceNumber seqno = 0;
  ValueKind kind = ValueKind::kPut;
};

inline uint64_t PackTag(SequenceNumber seq, ValueKind kind) {
  return (seq << 8) | static_cast<uint8_t>(kind);
}

// Encoded internal key: user key bytes followed by an 8-byte tag.
inline void AppendInternalKey(std::string* dst, std::string_view user_key,
                              SequenceNumber seq, ValueKind kind) {
  dst->append(user_key.data(), user_key.size());
  PutFixed64(dst, PackTag(seq, kind));
}

inline std::string MakeInternalKey(std::string_view user_key, SequenceNumber seq,
                                   ValueKind kind) {
  std::string out;
  out.reserve(user_key.size() + 8);
  AppendInternalKey(&out, user_key, seq, kind);
  return out;
}

inline std::string_view ExtractUserKey(std::string_view ikey) {
  return ikey.substr(0, ikey.size() - 8);
}

inline uint64_t ExtractTag(std::string_view ikey) {
  return DecodeFixed64(ikey.data() + ikey.size() - 8);
}

inline bool ParseInternalKey(std::string_view ikey, ParsedInternalKey* out) {
  if (ikey.size() < 8) return false;
  const uint64_t tag = ExtractTag(ikey);
  const auto kind = static_cast<uint8_t>(tag & 0xff);
  if (kind > static_cast<uint8_t>(ValueKind::kPut)) return false;
  out->user_key = ExtractUserKey(ikey);
  out->seqno = tag >> 8;
  out->kind = static_cast<ValueKind>(kind);
  return true;
}

// (user_key ascending, seqno descending). Equal seqnos compare equal.
inline std::strong_ordering CompareInternalKeys(const ParsedInternalKey& a,
                                                const ParsedInternalKey& b) {
  if (int r = a.user_key.compare(b.user_key); r != 0) {
    return r < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
  }
  return b.seqno <=> a.seqno;
}

// Same ordering over encoded keys; the tag packs seqno above kind.
inline int CompareEncodedInternalKeys(std::string_view a, std::string_view b) {
  if (int r = ExtractUserKey(a).compare(ExtractUserKey(b)); r != 0) return r;
  const uint64_t ta = ExtractTag(a);
  const uint64_t tb = ExtractTag(b);
  if (ta > tb) return -1;
  if (ta < tb) return 1;
  return 0;
}

struct InternalKeyLess {
  bool operator()(std::string_view a, std::string_view b) const {
    return CompareEncodedInternalKeys(a, b) < 0;
  }
};

}  // namespace alsm

template <>
struct std::hash<alsm::FileId> {
  size_t operator()(const alsm::FileId& f) const noexcept {
    return std::hash<uint64_t>{}(f.value);
  }
};

template <>
struct std::hash<alsm::EpochId> {
  size_t operator()(const alsm::EpochId& e) const noexcept {
    return std::hash<uint64_t>{}(e.value);
  }
};
