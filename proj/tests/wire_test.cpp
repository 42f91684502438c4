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

#include <gtest/gtest.h>

#include <thread>

#include "vflr/transport.hpp"
#include "vflr/wire.hpp"

namespace vflr::wire {
namespace {

using paillier::Ciphertext;

ProtocolMessage msg(MessageKind kind, std::uint32_t round, Body body) {
  return make_message(kind, round, expected_sender(kind), std::move(body));
}

// A well-formed two-round encrypted transcript.
Transcript encrypted_transcript(bool hybrid) {
  Transcript t;
  t.messages.push_back(msg(MessageKind::kPublicKey, 0, PublicKeyBody{BigInt(143), 1000}));
  for (std::uint32_t round = 1; round <= 2; ++round) {
    BatchAnnounceBody ba{hybrid ? std::vector<std::uint8_t>{1, 0, 1} : std::vector<std::uint8_t>{}, {4, 7, 9}};
    t.messages.push_back(msg(MessageKind::kBatchAnnounce, round, ba));
    t.messages.push_back(msg(MessageKind::kPartialLinPred, round, RealVectorBody{{0.5, -0.25}}));
    t.messages.push_back(msg(MessageKind::kEncResidues, round, CipherVectorBody{{Ciphertext{5}, Ciphertext{6}}}));
    t.messages.push_back(msg(MessageKind::kMaskNote, round, IntegerVectorBody{{BigInt(-3)}}));
    t.messages.push_back(msg(MessageKind::kMaskedEncGradient, round, CipherVectorBody{{Ciphertext{11}}}));
    t.messages.push_back(msg(MessageKind::kDecMaskedGradient, round, IntegerVectorBody{{BigInt(12)}}));
  }
  return t;
}

TEST(FrameTest, RoundtripEveryKind) {
  const Transcript t = encrypted_transcript(true);
  for (const auto& m : t.messages) EXPECT_EQ(decode_frame(encode_frame(m)), m) << to_string(m.kind);
  const auto plain = msg(MessageKind::kPlainNoisedResidues, 3, RealVectorBody{{-0.0, 1e-300, 7.5}});
  EXPECT_EQ(decode_frame(encode_frame(plain)), plain);
}

TEST(FrameTest, LayoutIsBigEndian) {
  const Bytes f = encode_frame(msg(MessageKind::kBatchAnnounce, 0x01020304, BatchAnnounceBody{{}, {0x0a0b0c0d}}));
  // length | kind | round | sender | mask count | index count | index
  const Bytes expected{0, 0, 0, 17, 2, 1, 2, 3, 4, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0x0a, 0x0b, 0x0c, 0x0d};
  EXPECT_EQ(f, expected);
}

TEST(FrameTest, SignedIntegers) {
  const auto m = msg(MessageKind::kDecMaskedGradient, 1, IntegerVectorBody{{BigInt(-5), BigInt(0), BigInt("123456789012345678901234567890")}});
  EXPECT_EQ(decode_frame(encode_frame(m)), m);
}

TEST(FrameTest, MalformedInputs) {
  Bytes f = encode_frame(msg(MessageKind::kPartialLinPred, 1, RealVectorBody{{1.0}}));
  Bytes truncated(f.begin(), f.end() - 1);
  EXPECT_THROW(decode_frame(truncated), ParseError);
  Bytes unknown = f;
  unknown[4] = 99;
  EXPECT_THROW(decode_frame(unknown), ParseError);
  Bytes trailing = f;
  trailing.push_back(0);
  EXPECT_THROW(decode_frame(trailing), ParseError);
  Bytes bad_sender = f;
  bad_sender[9] = 7;
  EXPECT_THROW(decode_frame(bad_sender), ParseError);
  // A count larger than the remaining payload is rejected before allocating.
  Bytes huge = f;
  huge[10] = 0xff;
  EXPECT_THROW(decode_frame(huge), ParseError);
  const auto nan = msg(MessageKind::kPartialLinPred, 1, RealVectorBody{{std::nan("")}});
  EXPECT_THROW(decode_frame(encode_frame(nan)), ParseError);
}

TEST(FrameTest, BodyMustMatchKind) {
  EXPECT_THROW(make_message(MessageKind::kPublicKey, 0, PartyId::kBob, RealVectorBody{}), ProtocolError);
  const auto m = msg(MessageKind::kPartialLinPred, 1, RealVectorBody{{1.0}});
  EXPECT_THROW(m.as<CipherVectorBody>(), ProtocolError);
}

TEST(BatchAnnounceTest, Forwarded) {
  EXPECT_EQ((BatchAnnounceBody{{}, {4, 7, 9}}).forwarded(), (std::vector<std::size_t>{4, 7, 9}));
  EXPECT_EQ((BatchAnnounceBody{{1, 0, 1}, {4, 7, 9}}).forwarded(), (std::vector<std::size_t>{4, 9}));
}

TEST(TranscriptTest, SerializeRoundtrip) {
  const Transcript t = encrypted_transcript(false);
  const Bytes blob = serialize_transcript(t);
  EXPECT_EQ(std::string(blob.begin(), blob.begin() + 4), "VFLT");
  EXPECT_EQ(blob[4], kTranscriptVersion);
  EXPECT_EQ(parse_transcript(blob).messages, t.messages);
}

TEST(TranscriptTest, ParseErrors) {
  Bytes blob = serialize_transcript(encrypted_transcript(false));
  Bytes bad_magic = blob;
  bad_magic[1] = 'X';
  EXPECT_THROW(parse_transcript(bad_magic), ParseError);
  Bytes bad_version = blob;
  bad_version[4] = 2;
  EXPECT_THROW(parse_transcript(bad_version), ParseError);
  EXPECT_THROW(parse_transcript(Bytes{'V', 'F'}), ParseError);
  Bytes cut(blob.begin(), blob.end() - 2);
  EXPECT_THROW(parse_transcript(cut), ParseError);
}

TEST(GrammarTest, Flavors) {
  EXPECT_EQ(check_grammar(Transcript{}), ProtocolFlavor::kEmpty);
  EXPECT_EQ(check_grammar(encrypted_transcript(false)), ProtocolFlavor::kBaseline);
  EXPECT_EQ(check_grammar(encrypted_transcript(true)), ProtocolFlavor::kHybrid);
  Transcript ldp;
  ldp.messages.push_back(msg(MessageKind::kBatchAnnounce, 1, BatchAnnounceBody{{}, {1, 2}}));
  ldp.messages.push_back(msg(MessageKind::kPartialLinPred, 1, RealVectorBody{{0.1, 0.2}}));
  ldp.messages.push_back(msg(MessageKind::kPlainNoisedResidues, 1, RealVectorBody{{0.1, 0.2}}));
  EXPECT_EQ(check_grammar(ldp), ProtocolFlavor::kLdp);
}

TEST(GrammarTest, Violations) {
  Transcript t = encrypted_transcript(false);
  Transcript wrong_order = t;
  std::swap(wrong_order.messages[2], wrong_order.messages[3]);
  EXPECT_THROW(check_grammar(wrong_order), ProtocolError);
  Transcript incomplete = t;
  incomplete.messages.pop_back();
  EXPECT_THROW(check_grammar(incomplete), ProtocolError);
  Transcript wrong_sender = t;
  wrong_sender.messages[2].sender = PartyId::kBob;
  EXPECT_THROW(check_grammar(wrong_sender), ProtocolError);
  Transcript wrong_round = t;
  wrong_round.messages[8].round = 5;
  EXPECT_THROW(check_grammar(wrong_round), ProtocolError);
  Transcript mixed = t;
  mixed.messages[7].body = BatchAnnounceBody{{1, 1, 0}, {4, 7, 9}};
  EXPECT_THROW(check_grammar(mixed), ProtocolError);
}

class TransportTest : public ::testing::TestWithParam<bool> {
 protected:
  transport::EndpointPair make() { return GetParam() ? transport::make_socket_pair() : transport::make_inprocess_pair(); }
};

TEST_P(TransportTest, OrderedDeliveryAndClose) {
  auto pair = make();
  std::vector<Bytes> frames;
  for (std::uint32_t i = 0; i < 200; ++i) {
    frames.push_back(encode_frame(msg(MessageKind::kPartialLinPred, i, RealVectorBody{std::vector<double>(i, 0.5)})));
  }
  std::thread sender([&] {
    for (const auto& f : frames) pair.bob->send(f);
    pair.bob->close();
  });
  std::vector<Bytes> got;
  while (auto f = pair.alice->recv()) got.push_back(std::move(*f));
  sender.join();
  EXPECT_EQ(got, frames);
}

INSTANTIATE_TEST_SUITE_P(Kinds, TransportTest, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "Socket" : "InProcess"; });

}  // namespace
}  // namespace vflr::wire
