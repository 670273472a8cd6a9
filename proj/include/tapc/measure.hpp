#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tapc/types.hpp"

namespace tapc {

struct EnclaveStateView;

// FNV-1a over a byte sequence. Used for measurement digests and state
// digests in traces; the canonical byte sequence is the ground truth,
// the digest is for display and cheap comparison.
uint64_t fnv1a64(const uint8_t* data, size_t n);
uint64_t fnv1a64(const std::vector<uint8_t>& bytes);

// An enclave measurement: the canonical encoding of the launch-time view
// plus its digest. Equal canonical bytes iff equal initial views.
struct Measurement {
  std::vector<uint8_t> canonical;
  uint64_t digest64 = 0;

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

// True iff the view looks freshly launched: pc at the entrypoint and all
// registers zero.
bool is_initial_view(const EnclaveStateView& view);

// Canonical encoding: ep as little-endian u32, then for each VA in
// ascending order: ev flag, permission bits (r|w<<1|x<<2), mapped flag,
// and the content word (little-endian, word_bits/8 bytes) when the VA is
// private and mapped, zero bytes otherwise.
Measurement measure(const PlatformConfig& cfg, const EnclaveStateView& view);

// Same, but refuses non-initial views.
std::optional<Measurement> measure_checked(const PlatformConfig& cfg,
                                           const EnclaveStateView& view);

}  // namespace tapc
