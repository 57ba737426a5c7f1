#include <gtest/gtest.h>

#include "cft/frame.hpp"
#include "generators.hpp"

namespace cft {
namespace {

Bytes ascii(std::string_view s) { return to_bytes(s); }

// Byte-wise XOR, written out independently of the library.
std::uint8_t xor_fold(const Bytes& b) {
  unsigned acc = 0;
  for (auto x : b) acc = acc ^ x;
  return static_cast<std::uint8_t>(acc);
}

TEST(Checksum, Examples) {
  EXPECT_EQ(checksum(Bytes{}), 0x00);
  EXPECT_EQ(checksum(Bytes{0x41, 0x42, 0x43}), 0x40);
  EXPECT_EQ(0x41 ^ 0x42 ^ 0x43, 0x40);
}

TEST(Checksum, SelfInverseAndLinear) {
  testing::Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    auto a = testing::random_bytes(rng, 64);
    auto b = testing::random_bytes(rng, 64);
    Bytes aa = a;
    aa.insert(aa.end(), a.begin(), a.end());
    EXPECT_EQ(checksum(aa), 0x00);
    Bytes ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    EXPECT_EQ(checksum(ab), checksum(a) ^ checksum(b));
    EXPECT_EQ(checksum(a), xor_fold(a));
  }
}

TEST(EncodeFrame, EmptyBye) {
  EXPECT_EQ(encode_frame(0x7F, Bytes{}), (Bytes{0x46, 0x54, 0x01, 0x7F, 0x00, 0x00, 0x00, 0x00, 0x00}));
}

TEST(EncodeFrame, HelloCli) {
  EXPECT_EQ(encode_frame(0x01, ascii("cli")),
            (Bytes{0x46, 0x54, 0x01, 0x01, 0x00, 0x00, 0x00, 0x03, 0x63, 0x6C, 0x69, 0x66}));
  EXPECT_EQ(0x63 ^ 0x6C ^ 0x69, 0x66);
}

TEST(EncodeFrame, LengthIsNinePlusPayload) {
  testing::Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    auto p = testing::random_bytes(rng, 500);
    EXPECT_EQ(encode_frame(static_cast<std::uint8_t>(i), p).size(), 9 + p.size());
  }
}

TEST(DecodeFrame, RoundTripIdentity) {
  testing::Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const auto op = static_cast<std::uint8_t>(testing::kAllOpcodes[i % 9]);
    auto p = testing::random_bytes(rng, 200);
    auto report = decode_frame(encode_frame(op, p));
    ASSERT_TRUE(report.well_formed());
    EXPECT_EQ(report.frame->opcode, op);
    EXPECT_EQ(report.frame->payload, p);
    EXPECT_EQ(report.frame->declared_length, p.size());
    EXPECT_EQ(report.consumed, 9 + p.size());
  }
}

TEST(DecodeFrame, HelloCliDecodes) {
  auto report = decode_frame(encode_frame(0x01, ascii("cli")));
  ASSERT_TRUE(report.frame);
  EXPECT_TRUE(report.violations.empty());
  EXPECT_EQ(report.frame->opcode, 0x01);
}

TEST(DecodeFrame, TruncatedCountsConsumedBytes) {
  // Header declares 5 payload bytes; only "cli" follows before the stream closes.
  Bytes listed{0x46, 0x54, 0x01, 0x01, 0x00, 0x00, 0x00, 0x05, 0x63, 0x6C, 0x69};
  MemorySource source(listed);
  auto report = decode_frame(source, Millis{100});
  EXPECT_TRUE(report.has(ViolationKind::Truncated));
  EXPECT_FALSE(report.frame);
  EXPECT_EQ(report.end, StreamEnd::Closed);
  EXPECT_EQ(report.consumed, listed.size());

  // With the would-be checksum byte of "cli" also on the wire, 12 bytes are consumed.
  Bytes with_sum = listed;
  with_sum.push_back(0x66);
  MemorySource source2(with_sum);
  auto report2 = decode_frame(source2, Millis{100});
  EXPECT_TRUE(report2.has(ViolationKind::Truncated));
  EXPECT_EQ(report2.consumed, 12u);
}

TEST(DecodeFrame, ComplementedChecksumIsFlagged) {
  auto bytes = encode_frame(0x01, ascii("cli"));
  bytes.back() = static_cast<std::uint8_t>(~bytes.back());
  auto report = decode_frame(bytes);
  ASSERT_TRUE(report.frame);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].kind, ViolationKind::BadChecksum);
}

TEST(DecodeFrame, EachHeaderViolationIsReported) {
  auto base = encode_frame(0x01, ascii("x"));
  auto magic = base;
  magic[0] = 0x00;
  EXPECT_TRUE(decode_frame(magic).has(ViolationKind::BadMagic));
  auto version = base;
  version[2] = 0x02;
  EXPECT_TRUE(decode_frame(version).has(ViolationKind::BadVersion));
  auto opcode = base;
  opcode[3] = 0x55;
  auto r = decode_frame(opcode);
  EXPECT_TRUE(r.has(ViolationKind::UnknownOpcode));
  EXPECT_TRUE(r.frame);  // an unknown opcode still frames normally
}

TEST(DecodeFrame, ChunkedSourceGivesSameReport) {
  testing::Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    auto bytes = encode_frame(0x11, testing::random_bytes(rng, 100));
    MemorySource one_byte(bytes, 1);
    auto a = decode_frame(one_byte, Millis{100});
    auto b = decode_frame(bytes);
    EXPECT_EQ(a.frame, b.frame);
    EXPECT_EQ(a.consumed, b.consumed);
  }
}

TEST(DecodeFrame, OversizedStopsAfterHeader) {
  Bytes header{0x46, 0x54, 0x01, 0x11, 0x80, 0x00, 0x00, 0x00, 0x01, 0x02};
  MemorySource source(header);
  DecodeOptions options;
  options.max_payload = 1u << 20;
  auto report = decode_frame(source, options);
  EXPECT_TRUE(report.has(ViolationKind::Oversized));
  EXPECT_EQ(report.end, StreamEnd::Limit);
  EXPECT_EQ(report.consumed, 8u);
  EXPECT_EQ(source.remaining(), 2u);
}

TEST(DecodeFrame, IdleStreamIsNotAFrame) {
  MemorySource empty(Bytes{});
  auto report = decode_frame(empty, Millis{10});
  EXPECT_TRUE(report.idle());
  EXPECT_TRUE(report.violations.empty());
}

// Fuzz: arbitrary bytes always produce a report, with violations iff not well formed.
TEST(DecodeFrame, FuzzNeverFails) {
  testing::Rng rng(5);
  for (int i = 0; i < 20000; ++i) {
    Bytes bytes = testing::random_bytes(rng, 48);
    if (i % 3 == 0 && bytes.size() >= 3) bytes[0] = 0x46, bytes[1] = 0x54, bytes[2] = 0x01;
    MemorySource source(bytes, 1 + i % 7);
    auto report = decode_frame(source, Millis{5});
    EXPECT_LE(report.consumed, bytes.size());
    EXPECT_EQ(report.well_formed(), report.frame.has_value() && report.violations.empty());
    if (report.frame) EXPECT_EQ(report.consumed, 9 + report.frame->payload.size());
  }
}

}  // namespace
}  // namespace cft
