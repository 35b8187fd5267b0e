#include "tbag/wire.hpp"

#include "tbag/detail/byte_io.hpp"

#include <cctype>
#include <cstring>

namespace tbag {

void validate_topic(const std::string& topic) {
  if (topic.empty() || topic.size() > 255) {
    throw std::invalid_argument("topic must be 1..255 bytes: '" + topic + "'");
  }
  if (topic.front() != '/') throw std::invalid_argument("topic must start with '/': " + topic);
  for (unsigned char c : topic) {
    if (std::isspace(c)) throw std::invalid_argument("topic contains whitespace: " + topic);
  }
}

}  // namespace tbag

namespace tbag::wire {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'T', 'B', 'A', 'G'};

using Writer = detail::ByteWriter;

struct ShortInput {
  DecodeError error;
  [[noreturn]] void operator()() const { throw DecodeFailure(error); }
};

class Reader : public detail::ByteReader<ShortInput> {
 public:
  Reader(std::span<const std::uint8_t> in, DecodeError short_error)
      : detail::ByteReader<ShortInput>(in, ShortInput{short_error}) {}
};

void encode_body(Writer& w, const Payload& payload) {
  std::visit(
      [&w](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, JointStateMsg>) {
          w.u8(static_cast<std::uint8_t>(body.arms.size()));
          for (const auto& arm : body.arms) {
            w.f64s(arm.position);
            w.f64s(arm.velocity);
            w.f64s(arm.effort);
            w.f64(arm.gripper);
          }
        } else if constexpr (std::is_same_v<T, JointCommandMsg>) {
          w.u8(static_cast<std::uint8_t>(body.arms.size()));
          for (const auto& arm : body.arms) {
            w.f64s(arm.angles);
            w.f64(arm.gripper);
          }
        } else if constexpr (std::is_same_v<T, FeedbackSignal>) {
          w.u8(static_cast<std::uint8_t>(body.cause));
          w.f64s(body.magnitude.left);
          w.f64s(body.magnitude.right);
        } else if constexpr (std::is_same_v<T, CameraFrame>) {
          if (body.pixels.size() != std::size_t{body.width} * body.height * 3) {
            throw std::invalid_argument("camera frame pixel buffer does not match width*height*3");
          }
          w.u8(body.camera_id);
          w.u64(body.frame_index);
          w.u16(body.width);
          w.u16(body.height);
          w.bytes(body.pixels);
        } else {
          w.u8(static_cast<std::uint8_t>(body.code));
          if (body.arg) w.u64(*body.arg);
        }
      },
      payload);
}

std::size_t arm_count_checked(Reader& r, std::size_t per_arm) {
  const std::size_t n = r.u8();
  if (r.remaining() != n * per_arm) throw DecodeFailure(DecodeError::LengthMismatch);
  return n;
}

Payload decode_body(PayloadTag tag, std::span<const std::uint8_t> body) {
  Reader r(body, DecodeError::LengthMismatch);
  switch (tag) {
    case PayloadTag::JointState: {
      JointStateMsg m;
      m.arms.resize(arm_count_checked(r, (3 * kArmJoints + 1) * 8));
      for (auto& arm : m.arms) {
        r.f64s(arm.position);
        r.f64s(arm.velocity);
        r.f64s(arm.effort);
        arm.gripper = r.f64();
      }
      return m;
    }
    case PayloadTag::JointCommand: {
      JointCommandMsg m;
      m.arms.resize(arm_count_checked(r, (kArmJoints + 1) * 8));
      for (auto& arm : m.arms) {
        r.f64s(arm.angles);
        arm.gripper = r.f64();
      }
      return m;
    }
    case PayloadTag::Feedback: {
      if (body.size() != 1 + 2 * kArmJoints * 8) throw DecodeFailure(DecodeError::LengthMismatch);
      FeedbackSignal f;
      f.cause = static_cast<FeedbackCause>(r.u8());
      r.f64s(f.magnitude.left);
      r.f64s(f.magnitude.right);
      return f;
    }
    case PayloadTag::CameraFrame: {
      CameraFrame c;
      c.camera_id = r.u8();
      c.frame_index = r.u64();
      c.width = r.u16();
      c.height = r.u16();
      const std::size_t n = std::size_t{c.width} * c.height * 3;
      if (r.remaining() != n) throw DecodeFailure(DecodeError::LengthMismatch);
      auto px = r.bytes(n);
      c.pixels.assign(px.begin(), px.end());
      return c;
    }
    case PayloadTag::SessionEvent: {
      SessionEvent e;
      e.code = static_cast<SessionEventCode>(r.u8());
      if (r.remaining() == 8) {
        e.arg = r.u64();
      } else if (r.remaining() != 0) {
        throw DecodeFailure(DecodeError::LengthMismatch);
      }
      return e;
    }
  }
  throw DecodeFailure(DecodeError::UnknownPayloadTag);
}

}  // namespace

const char* to_string(DecodeError e) {
  switch (e) {
    case DecodeError::BadMagic: return "BadMagic";
    case DecodeError::BadVersion: return "BadVersion";
    case DecodeError::UnknownPayloadTag: return "UnknownPayloadTag";
    case DecodeError::TruncatedFrame: return "TruncatedFrame";
    case DecodeError::LengthMismatch: return "LengthMismatch";
    case DecodeError::InvalidTopic: return "InvalidTopic";
  }
  return "Unknown";
}

DecodeFailure::DecodeFailure(DecodeError code)
    : std::runtime_error(std::string("frame decode failed: ") + to_string(code)), code_(code) {}

std::vector<std::uint8_t> encode_frame(const BusMessage& msg) {
  validate_topic(msg.topic);
  std::vector<std::uint8_t> body;
  Writer bw(body);
  encode_body(bw, msg.payload);
  if (body.size() > kMaxBody) throw std::length_error("bus payload exceeds 2^24 bytes");

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + msg.topic.size() + body.size());
  Writer w(out);
  w.bytes(kMagic);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(payload_tag(msg.payload)));
  w.u8(static_cast<std::uint8_t>(msg.topic.size()));
  w.bytes({reinterpret_cast<const std::uint8_t*>(msg.topic.data()), msg.topic.size()});
  w.u64(msg.stamp);
  w.u64(msg.seq);
  w.u32(static_cast<std::uint32_t>(body.size()));
  w.bytes(body);
  return out;
}

PayloadTag check_prefix(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw DecodeFailure(DecodeError::TruncatedFrame);
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw DecodeFailure(DecodeError::BadMagic);
  }
  if (bytes.size() < kPrefixSize) throw DecodeFailure(DecodeError::TruncatedFrame);
  if (bytes[4] != kVersion) throw DecodeFailure(DecodeError::BadVersion);
  const auto tag = bytes[5];
  if (tag < 1 || tag > 5) throw DecodeFailure(DecodeError::UnknownPayloadTag);
  return static_cast<PayloadTag>(tag);
}

std::size_t frame_length(std::span<const std::uint8_t> head) {
  check_prefix(head);
  const std::size_t topic_len = head[6];
  const std::size_t fixed = kPrefixSize + topic_len + kFixedAfterTopic;
  if (head.size() < fixed) throw DecodeFailure(DecodeError::TruncatedFrame);
  Reader r(head.subspan(fixed - 4, 4), DecodeError::TruncatedFrame);
  const std::size_t body_len = r.u32();
  if (body_len > kMaxBody) throw DecodeFailure(DecodeError::LengthMismatch);
  return fixed + body_len;
}

BusMessage decode_frame(std::span<const std::uint8_t> bytes) {
  const PayloadTag tag = check_prefix(bytes);
  Reader r(bytes.subspan(kPrefixSize - 1), DecodeError::TruncatedFrame);
  const std::size_t topic_len = r.u8();
  auto topic_bytes = r.bytes(topic_len);
  BusMessage msg;
  msg.topic.assign(topic_bytes.begin(), topic_bytes.end());
  msg.stamp = r.u64();
  msg.seq = r.u64();
  const std::size_t body_len = r.u32();
  if (body_len > kMaxBody) throw DecodeFailure(DecodeError::LengthMismatch);
  if (r.remaining() < body_len) throw DecodeFailure(DecodeError::TruncatedFrame);
  if (r.remaining() > body_len) throw DecodeFailure(DecodeError::LengthMismatch);
  try {
    validate_topic(msg.topic);
  } catch (const std::invalid_argument&) {
    throw DecodeFailure(DecodeError::InvalidTopic);
  }
  msg.payload = decode_body(tag, r.bytes(body_len));
  return msg;
}

std::vector<BusMessage> decode_stream(std::span<const std::uint8_t> bytes) {
  std::vector<BusMessage> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto rest = bytes.subspan(pos);
    const std::size_t len = frame_length(rest);
    if (rest.size() < len) throw DecodeFailure(DecodeError::TruncatedFrame);
    out.push_back(decode_frame(rest.first(len)));
    pos += len;
  }
  return out;
}

}  // namespace tbag::wire
