#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "tbag/messages.hpp"

namespace tbag::wire {

// magic(4) version(1) tag(1) topic_len(1) | topic | stamp(8) seq(8) body_len(4) | body
inline constexpr std::size_t kPrefixSize = 7;
inline constexpr std::size_t kFixedAfterTopic = 20;
inline constexpr std::size_t kHeaderSize = kPrefixSize + kFixedAfterTopic;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kMaxBody = std::size_t{1} << 24;

enum class DecodeError {
  BadMagic,
  BadVersion,
  UnknownPayloadTag,
  TruncatedFrame,
  LengthMismatch,
  InvalidTopic,
};

const char* to_string(DecodeError e);

class DecodeFailure : public std::runtime_error {
 public:
  explicit DecodeFailure(DecodeError code);
  DecodeError code() const noexcept { return code_; }

 private:
  DecodeError code_;
};

std::vector<std::uint8_t> encode_frame(const BusMessage& msg);

/// Decodes exactly one frame occupying all of `bytes`.
BusMessage decode_frame(std::span<const std::uint8_t> bytes);

/// Checks magic, version and payload tag of the first kPrefixSize bytes.
PayloadTag check_prefix(std::span<const std::uint8_t> bytes);

/// Given at least kPrefixSize + topic_len + kFixedAfterTopic bytes of a
/// frame, returns its total length. Validates magic/version/tag on the way.
std::size_t frame_length(std::span<const std::uint8_t> head);

/// Splits a concatenation of frames (a message log) back into messages.
std::vector<BusMessage> decode_stream(std::span<const std::uint8_t> bytes);

}  // namespace tbag::wire
