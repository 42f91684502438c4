// Copyright 2026 The vflr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Protocol messages, their binary framing, and transcript files.
//
// Frame:      u32 payload length | u8 kind | payload
// Payload:    u32 round | u8 sender | body
// Integers:   u32 length | big-endian magnitude | u8 sign (1 = negative)
// Reals:      u32 count | IEEE-754 binary64, big-endian, per element
// Ciphertext: u32 count | per element (u32 length | big-endian magnitude)
// Transcript: "VFLT" | u8 version | frame*
//
// All multi-byte integers are big-endian. The same frames travel over the
// socket transport and are stored in transcript files.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "vflr/bytes.hpp"
#include "vflr/errors.hpp"
#include "vflr/numeric.hpp"
#include "vflr/paillier.hpp"
#include "vflr/rng.hpp"

namespace vflr::wire {

enum class MessageKind : std::uint8_t {
  kPublicKey = 1,
  kBatchAnnounce = 2,
  kPartialLinPred = 3,
  kEncResidues = 4,
  kMaskedEncGradient = 5,
  kDecMaskedGradient = 6,
  kPlainNoisedResidues = 7,
  // Transcript-only record of the passive party's own gradient mask. It is
  // never sent over a transport; it is part of what that party knows.
  kMaskNote = 0x40,
};

inline const char* to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kPublicKey: return "PublicKey";
    case MessageKind::kBatchAnnounce: return "BatchAnnounce";
    case MessageKind::kPartialLinPred: return "PartialLinPred";
    case MessageKind::kEncResidues: return "EncResidues";
    case MessageKind::kMaskedEncGradient: return "MaskedEncGradient";
    case MessageKind::kDecMaskedGradient: return "DecMaskedGradient";
    case MessageKind::kPlainNoisedResidues: return "PlainNoisedResidues";
    case MessageKind::kMaskNote: return "MaskNote";
  }
  return "Unknown";
}

struct PublicKeyBody {
  BigInt n;
  std::int64_t scale = paillier::kDefaultScale;  // fixed-point scale both parties use
  friend bool operator==(const PublicKeyBody&, const PublicKeyBody&) = default;
};

struct BatchAnnounceBody {
  std::vector<std::uint8_t> rr_mask;  // empty outside the hybrid protocol
  std::vector<std::uint32_t> indices;
  friend bool operator==(const BatchAnnounceBody&, const BatchAnnounceBody&) = default;

  // Rows the passive party works on: every index, or only those whose
  // obscured indicator bit is set.
  std::vector<std::size_t> forwarded() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < indices.size(); ++i)
      if (rr_mask.empty() || rr_mask[i] != 0) rows.push_back(indices[i]);
    return rows;
  }
};

struct RealVectorBody {
  std::vector<double> values;
  friend bool operator==(const RealVectorBody&, const RealVectorBody&) = default;
};

struct CipherVectorBody {
  std::vector<paillier::Ciphertext> values;
  friend bool operator==(const CipherVectorBody&, const CipherVectorBody&) = default;
};

struct IntegerVectorBody {
  std::vector<BigInt> values;
  friend bool operator==(const IntegerVectorBody& a, const IntegerVectorBody& b) { return a.values == b.values; }
};

using Body = std::variant<PublicKeyBody, BatchAnnounceBody, RealVectorBody, CipherVectorBody, IntegerVectorBody>;

struct ProtocolMessage {
  MessageKind kind;
  std::uint32_t round = 0;
  PartyId sender = PartyId::kBob;
  Body body;

  friend bool operator==(const ProtocolMessage&, const ProtocolMessage&) = default;

  template <typename T>
  const T& as() const {
    if (const T* p = std::get_if<T>(&body)) return *p;
    throw ProtocolError(std::string("message ") + to_string(kind) + ": unexpected body type");
  }
};

namespace detail {

inline bool body_matches(MessageKind kind, const Body& body) {
  switch (kind) {
    case MessageKind::kPublicKey: return std::holds_alternative<PublicKeyBody>(body);
    case MessageKind::kBatchAnnounce: return std::holds_alternative<BatchAnnounceBody>(body);
    case MessageKind::kPartialLinPred:
    case MessageKind::kPlainNoisedResidues: return std::holds_alternative<RealVectorBody>(body);
    case MessageKind::kEncResidues:
    case MessageKind::kMaskedEncGradient: return std::holds_alternative<CipherVectorBody>(body);
    case MessageKind::kDecMaskedGradient:
    case MessageKind::kMaskNote: return std::holds_alternative<IntegerVectorBody>(body);
  }
  return false;
}

inline bool known_kind(std::uint8_t k) {
  return (k >= 1 && k <= 7) || k == static_cast<std::uint8_t>(MessageKind::kMaskNote);
}

}  // namespace detail

// Convenience constructors.
inline ProtocolMessage make_message(MessageKind kind, std::uint32_t round, PartyId sender, Body body) {
  if (!detail::body_matches(kind, body)) {
    throw ProtocolError(std::string("make_message: body does not match kind ") + to_string(kind));
  }
  return ProtocolMessage{kind, round, sender, std::move(body)};
}

inline Bytes encode_payload(const ProtocolMessage& msg) {
  ByteWriter w;
  w.u32(msg.round);
  w.u8(static_cast<std::uint8_t>(msg.sender));
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, PublicKeyBody>) {
          w.integer(body.n);
          w.integer(BigInt(static_cast<long>(body.scale)));
        } else if constexpr (std::is_same_v<T, BatchAnnounceBody>) {
          w.u32(static_cast<std::uint32_t>(body.rr_mask.size()));
          for (std::uint8_t b : body.rr_mask) w.u8(b);
          w.u32(static_cast<std::uint32_t>(body.indices.size()));
          for (std::uint32_t i : body.indices) w.u32(i);
        } else if constexpr (std::is_same_v<T, RealVectorBody>) {
          w.u32(static_cast<std::uint32_t>(body.values.size()));
          for (double v : body.values) w.f64(v);
        } else if constexpr (std::is_same_v<T, CipherVectorBody>) {
          w.u32(static_cast<std::uint32_t>(body.values.size()));
          for (const auto& c : body.values) w.magnitude(c.value);
        } else {
          w.u32(static_cast<std::uint32_t>(body.values.size()));
          for (const auto& v : body.values) w.integer(v);
        }
      },
      msg.body);
  return w.take();
}

inline Bytes encode_frame(const ProtocolMessage& msg) {
  const Bytes payload = encode_payload(msg);
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.u8(static_cast<std::uint8_t>(msg.kind));
  w.raw(payload);
  return w.take();
}

inline ProtocolMessage decode_payload(MessageKind kind, std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  ProtocolMessage msg{kind, r.u32(), PartyId::kBob, {}};
  const std::uint8_t sender = r.u8();
  if (sender > 1) throw ParseError("frame: bad sender byte");
  msg.sender = static_cast<PartyId>(sender);
  switch (kind) {
    case MessageKind::kPublicKey: {
      PublicKeyBody body;
      body.n = r.integer();
      const BigInt scale = r.integer();
      if (sgn(body.n) <= 0 || sgn(scale) <= 0 || !mpz_fits_slong_p(scale.get_mpz_t())) {
        throw ParseError("PublicKey: bad modulus or scale");
      }
      body.scale = mpz_get_si(scale.get_mpz_t());
      msg.body = std::move(body);
      break;
    }
    case MessageKind::kBatchAnnounce: {
      BatchAnnounceBody body;
      body.rr_mask.resize(r.count(1));
      for (auto& b : body.rr_mask) {
        b = r.u8();
        if (b > 1) throw ParseError("BatchAnnounce: indicator bit not 0/1");
      }
      body.indices.resize(r.count(4));
      for (auto& i : body.indices) i = r.u32();
      if (!body.rr_mask.empty() && body.rr_mask.size() != body.indices.size()) {
        throw ParseError("BatchAnnounce: indicator and index lengths differ");
      }
      msg.body = std::move(body);
      break;
    }
    case MessageKind::kPartialLinPred:
    case MessageKind::kPlainNoisedResidues: {
      RealVectorBody body;
      body.values.resize(r.count(8));
      for (double& v : body.values) {
        v = r.f64();
        if (!std::isfinite(v)) throw ParseError("real vector: non-finite element");
      }
      msg.body = std::move(body);
      break;
    }
    case MessageKind::kEncResidues:
    case MessageKind::kMaskedEncGradient: {
      CipherVectorBody body;
      body.values.resize(r.count(4));
      for (auto& c : body.values) c.value = r.magnitude();
      msg.body = std::move(body);
      break;
    }
    case MessageKind::kDecMaskedGradient:
    case MessageKind::kMaskNote: {
      IntegerVectorBody body;
      body.values.resize(r.count(5));
      for (auto& v : body.values) v = r.integer();
      msg.body = std::move(body);
      break;
    }
  }
  if (!r.done()) throw ParseError(std::string("frame ") + to_string(kind) + ": trailing payload bytes");
  return msg;
}

// Reads one frame starting at the reader position.
inline ProtocolMessage read_frame(ByteReader& r) {
  const std::uint32_t length = r.u32();
  const std::uint8_t kind = r.u8();
  if (!detail::known_kind(kind)) throw ParseError("frame: unknown message kind " + std::to_string(kind));
  return decode_payload(static_cast<MessageKind>(kind), r.raw(length));
}

inline ProtocolMessage decode_frame(std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  ProtocolMessage msg = read_frame(r);
  if (!r.done()) throw ParseError("frame: trailing bytes");
  return msg;
}

// ---------------------------------------------------------------------------
// Transcripts

inline constexpr std::uint8_t kTranscriptVersion = 1;

struct RoundTiming {
  std::uint32_t round = 0;
  double seconds = 0.0;
};

struct Transcript {
  std::vector<ProtocolMessage> messages;
  std::vector<RoundTiming> round_timings;  // in memory only; not serialized
};

inline Bytes serialize_transcript(const Transcript& t) {
  ByteWriter w;
  w.raw(std::string_view("VFLT"));
  w.u8(kTranscriptVersion);
  for (const auto& msg : t.messages) w.raw(encode_frame(msg));
  return w.take();
}

inline Transcript parse_transcript(std::span<const std::uint8_t> blob) {
  ByteReader r(blob);
  if (r.remaining() < 5) throw ParseError("transcript: too short");
  const auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "VFLT") throw ParseError("transcript: bad magic");
  const std::uint8_t version = r.u8();
  if (version != kTranscriptVersion) {
    throw ParseError("transcript: unsupported version " + std::to_string(version) + " (expected " +
                     std::to_string(kTranscriptVersion) + ")");
  }
  Transcript t;
  while (!r.done()) t.messages.push_back(read_frame(r));
  return t;
}

// ---------------------------------------------------------------------------
// Message-sequence grammar.
//
//   encrypted (baseline, hybrid):  PublicKey (BatchAnnounce PartialLinPred
//                                  EncResidues MaskNote MaskedEncGradient
//                                  DecMaskedGradient)*
//   plaintext LDP:                 (BatchAnnounce PartialLinPred PlainNoisedResidues)*
//
// Rounds are numbered 1, 2, ... and every message of a round carries its
// number; the public key travels in round 0. Hybrid transcripts carry an
// indicator vector in every BatchAnnounce, baseline transcripts in none.

enum class ProtocolFlavor { kEmpty, kBaseline, kHybrid, kLdp };

inline const char* to_string(ProtocolFlavor f) {
  switch (f) {
    case ProtocolFlavor::kEmpty: return "empty";
    case ProtocolFlavor::kBaseline: return "baseline";
    case ProtocolFlavor::kHybrid: return "hybrid";
    case ProtocolFlavor::kLdp: return "ldp";
  }
  return "?";
}

inline PartyId expected_sender(MessageKind kind) {
  switch (kind) {
    case MessageKind::kPartialLinPred:
    case MessageKind::kMaskedEncGradient:
    case MessageKind::kMaskNote: return PartyId::kAlice;
    default: return PartyId::kBob;
  }
}

inline ProtocolFlavor check_grammar(const Transcript& t) {
  const auto& m = t.messages;
  if (m.empty()) return ProtocolFlavor::kEmpty;
  auto fail = [](std::size_t at, const std::string& why) -> void {
    throw ProtocolError("transcript message " + std::to_string(at) + ": " + why);
  };
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].sender != expected_sender(m[i].kind)) fail(i, std::string(to_string(m[i].kind)) + " from wrong party");
    if (!detail::body_matches(m[i].kind, m[i].body)) fail(i, "body does not match kind");
  }

  const bool encrypted = m.front().kind == MessageKind::kPublicKey;
  static constexpr MessageKind kEncryptedRound[] = {
      MessageKind::kBatchAnnounce, MessageKind::kPartialLinPred, MessageKind::kEncResidues,
      MessageKind::kMaskNote, MessageKind::kMaskedEncGradient, MessageKind::kDecMaskedGradient};
  static constexpr MessageKind kLdpRound[] = {MessageKind::kBatchAnnounce, MessageKind::kPartialLinPred,
                                              MessageKind::kPlainNoisedResidues};
  const std::span<const MessageKind> round_shape =
      encrypted ? std::span<const MessageKind>(kEncryptedRound) : std::span<const MessageKind>(kLdpRound);

  std::size_t pos = 0;
  if (encrypted) {
    if (m[0].round != 0) fail(0, "public key must be in round 0");
    pos = 1;
  }
  if ((m.size() - pos) % round_shape.size() != 0) fail(m.size() - 1, "incomplete final round");
  std::optional<bool> hybrid;
  std::uint32_t expected_round = 1;
  for (; pos < m.size(); pos += round_shape.size(), ++expected_round) {
    for (std::size_t k = 0; k < round_shape.size(); ++k) {
      const auto& msg = m[pos + k];
      if (msg.kind != round_shape[k]) {
        fail(pos + k, std::string("expected ") + to_string(round_shape[k]) + ", got " + to_string(msg.kind));
      }
      if (msg.round != expected_round) fail(pos + k, "round number out of sequence");
    }
    const bool has_mask = !m[pos].as<BatchAnnounceBody>().rr_mask.empty();
    if (!encrypted && has_mask) fail(pos, "indicator vector in a plaintext protocol");
    if (hybrid && *hybrid != has_mask) fail(pos, "mixed baseline and hybrid rounds");
    hybrid = has_mask;
  }
  if (!encrypted) return ProtocolFlavor::kLdp;
  return hybrid.value_or(false) ? ProtocolFlavor::kHybrid : ProtocolFlavor::kBaseline;
}

}  // namespace vflr::wire
