#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dcg/bytes.hpp"
#include "dcg/engine.hpp"
#include "dcg/frame.hpp"

namespace dcg {

// --- DCGW1 -----------------------------------------------------------------
//
// Every message:   u32 length | "DCGW1" | u8 type | body
// `length` counts everything after itself. Integers are little-endian;
// strings are u8-length prefixed, blobs u32-length prefixed.
//
//   0x01 CreateSession  u8 game, u8 fps, u8 objects
//   0x02 GetFrame       str session
//   0x03 PostEvent      str session, u8 kind, i16 x, i16 y, u32 client_ms
//   0x81 Ticket         str session, u64 created_ms, u8 game, u8 fps, u8 objects
//   0x82 Frame          u8 status, u32 frame_index, u32 server_ms, blob DCGF
//   0x83 EventResult    u8 outcome, u8 status
//   0xEE Error          u16 code, str message

inline constexpr std::string_view kWireMagic = "DCGW1";

enum class MsgType : uint8_t {
  CreateSession = 0x01,
  GetFrame = 0x02,
  PostEvent = 0x03,
  Ticket = 0x81,
  FrameReply = 0x82,
  EventResult = 0x83,
  Error = 0xEE,
};

enum class WireError : uint16_t {
  InvalidParameterization = 1,
  UnknownSession = 2,
  ExpiredSession = 3,
  NoObjectAtPoint = 4,
  InvalidSequence = 5,
  SessionTerminal = 6,
  HoldCapExceeded = 7,
  DropOutsideFrame = 8,
  OutOfBounds = 9,
  Malformed = 10,
  UnknownGame = 11,
  Unreachable = 12,
  CapacityExceeded = 13,
};

constexpr std::string_view to_string(WireError e) {
  switch (e) {
    case WireError::InvalidParameterization: return "invalid parameterization";
    case WireError::UnknownSession: return "unknown session";
    case WireError::ExpiredSession: return "expired session";
    case WireError::NoObjectAtPoint: return "no object at point";
    case WireError::InvalidSequence: return "invalid sequence";
    case WireError::SessionTerminal: return "session terminal";
    case WireError::HoldCapExceeded: return "hold cap exceeded";
    case WireError::DropOutsideFrame: return "drop outside frame";
    case WireError::OutOfBounds: return "point out of bounds";
    case WireError::Malformed: return "malformed message";
    case WireError::UnknownGame: return "unknown game";
    case WireError::Unreachable: return "service unreachable";
    case WireError::CapacityExceeded: return "session capacity exceeded";
  }
  return "?";
}

enum class EventKind : uint8_t { Click = 1, Drop = 2, Poll = 3 };
enum class EventOutcome : uint8_t { Ack = 0, Star = 1, Cross = 2 };

struct CreateSessionReq {
  uint8_t game = 0;
  uint8_t fps = 20;
  uint8_t objects = 4;
  friend bool operator==(const CreateSessionReq&, const CreateSessionReq&) = default;
};

struct GetFrameReq {
  std::string session_id;
  friend bool operator==(const GetFrameReq&, const GetFrameReq&) = default;
};

struct PostEventReq {
  std::string session_id;
  EventKind kind = EventKind::Poll;
  int16_t x = 0;
  int16_t y = 0;
  uint32_t client_ms = 0;
  friend bool operator==(const PostEventReq&, const PostEventReq&) = default;
};

struct TicketMsg {
  std::string session_id;
  uint64_t created_ms = 0;
  uint8_t game = 0;
  uint8_t fps = 0;
  uint8_t objects = 0;
  friend bool operator==(const TicketMsg&, const TicketMsg&) = default;
};

struct FrameMsg {
  SessionStatus status = SessionStatus::InProgress;
  uint32_t frame_index = 0;
  uint32_t server_ms = 0;
  Frame frame;
  friend bool operator==(const FrameMsg&, const FrameMsg&) = default;
};

struct EventResultMsg {
  EventOutcome outcome = EventOutcome::Ack;
  SessionStatus status = SessionStatus::InProgress;
  friend bool operator==(const EventResultMsg&, const EventResultMsg&) = default;
};

struct ErrorMsg {
  WireError code = WireError::Malformed;
  std::string message;
  friend bool operator==(const ErrorMsg&, const ErrorMsg&) = default;
};

using Request = std::variant<CreateSessionReq, GetFrameReq, PostEventReq>;
using Response = std::variant<TicketMsg, FrameMsg, EventResultMsg, ErrorMsg>;

namespace detail {

inline std::vector<uint8_t> envelope(MsgType type, const std::vector<uint8_t>& body) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(kWireMagic.size() + 1 + body.size()));
  w.raw(kWireMagic);
  w.u8(static_cast<uint8_t>(type));
  w.raw(body);
  return w.take();
}

/// Validates the envelope and returns (type, body reader positioned after the type byte).
inline MsgType open_envelope(ByteReader& r, std::span<const uint8_t> bytes) {
  const uint32_t len = r.u32();
  if (len != bytes.size() - 4) throw FormatError("length prefix does not match message size");
  r.expect_magic(kWireMagic);
  return static_cast<MsgType>(r.u8());
}

inline SessionStatus read_status(ByteReader& r) {
  const uint8_t s = r.u8();
  if (s > 3) throw FormatError("bad status byte");
  return static_cast<SessionStatus>(s);
}

inline void expect_end(const ByteReader& r) {
  if (r.remaining() != 0) throw FormatError("trailing bytes after message body");
}

}  // namespace detail

inline std::vector<uint8_t> encode_request(const Request& req) {
  ByteWriter w;
  MsgType type{};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CreateSessionReq>) {
          type = MsgType::CreateSession;
          w.u8(m.game);
          w.u8(m.fps);
          w.u8(m.objects);
        } else if constexpr (std::is_same_v<T, GetFrameReq>) {
          type = MsgType::GetFrame;
          w.short_string(m.session_id);
        } else {
          type = MsgType::PostEvent;
          w.short_string(m.session_id);
          w.u8(static_cast<uint8_t>(m.kind));
          w.i16(m.x);
          w.i16(m.y);
          w.u32(m.client_ms);
        }
      },
      req);
  return detail::envelope(type, w.take());
}

/// Throws FormatError on anything that is not a well-formed request.
inline Request decode_request(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  const MsgType type = detail::open_envelope(r, bytes);
  Request out;
  switch (type) {
    case MsgType::CreateSession: {
      CreateSessionReq m;
      m.game = r.u8();
      m.fps = r.u8();
      m.objects = r.u8();
      out = m;
      break;
    }
    case MsgType::GetFrame:
      out = GetFrameReq{r.short_string()};
      break;
    case MsgType::PostEvent: {
      PostEventReq m;
      m.session_id = r.short_string();
      const uint8_t kind = r.u8();
      if (kind < 1 || kind > 3) throw FormatError("bad event kind");
      m.kind = static_cast<EventKind>(kind);
      m.x = r.i16();
      m.y = r.i16();
      m.client_ms = r.u32();
      out = m;
      break;
    }
    default:
      throw FormatError("not a request type");
  }
  detail::expect_end(r);
  return out;
}

inline std::vector<uint8_t> encode_response(const Response& resp) {
  ByteWriter w;
  MsgType type{};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TicketMsg>) {
          type = MsgType::Ticket;
          w.short_string(m.session_id);
          w.u64(m.created_ms);
          w.u8(m.game);
          w.u8(m.fps);
          w.u8(m.objects);
        } else if constexpr (std::is_same_v<T, FrameMsg>) {
          type = MsgType::FrameReply;
          w.u8(static_cast<uint8_t>(m.status));
          w.u32(m.frame_index);
          w.u32(m.server_ms);
          w.blob(encode_dcgf(m.frame));
        } else if constexpr (std::is_same_v<T, EventResultMsg>) {
          type = MsgType::EventResult;
          w.u8(static_cast<uint8_t>(m.outcome));
          w.u8(static_cast<uint8_t>(m.status));
        } else {
          type = MsgType::Error;
          w.u16(static_cast<uint16_t>(m.code));
          w.short_string(m.message.substr(0, 255));
        }
      },
      resp);
  return detail::envelope(type, w.take());
}

inline Response decode_response(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  const MsgType type = detail::open_envelope(r, bytes);
  Response out;
  switch (type) {
    case MsgType::Ticket: {
      TicketMsg m;
      m.session_id = r.short_string();
      m.created_ms = r.u64();
      m.game = r.u8();
      m.fps = r.u8();
      m.objects = r.u8();
      out = m;
      break;
    }
    case MsgType::FrameReply: {
      FrameMsg m;
      m.status = detail::read_status(r);
      m.frame_index = r.u32();
      m.server_ms = r.u32();
      m.frame = decode_dcgf(r.blob());
      out = std::move(m);
      break;
    }
    case MsgType::EventResult: {
      EventResultMsg m;
      const uint8_t o = r.u8();
      if (o > 2) throw FormatError("bad event outcome");
      m.outcome = static_cast<EventOutcome>(o);
      m.status = detail::read_status(r);
      out = m;
      break;
    }
    case MsgType::Error: {
      ErrorMsg m;
      m.code = static_cast<WireError>(r.u16());
      m.message = r.short_string();
      out = m;
      break;
    }
    default:
      throw FormatError("not a response type");
  }
  detail::expect_end(r);
  return out;
}

}  // namespace dcg
