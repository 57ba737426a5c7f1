#include <gtest/gtest.h>

#include "cft/payload.hpp"
#include "generators.hpp"

namespace cft {
namespace {

TEST(EncodePayload, PutReqHandLayout) {
  EXPECT_EQ(encode_payload(msg::PutReq{"a.txt", 10, 4}),
            (Bytes{0x00, 0x05, 0x61, 0x2E, 0x74, 0x78, 0x74, 0x00, 0x00, 0x00, 0x0A, 0x00, 0x04}));
}

TEST(EncodePayload, OtherLayouts) {
  EXPECT_EQ(encode_payload(msg::Err{0x03, "no"}), (Bytes{0x03, 'n', 'o'}));
  EXPECT_EQ(encode_payload(msg::Data{0x01020304, {0xAA}}), (Bytes{0x01, 0x02, 0x03, 0x04, 0xAA}));
  EXPECT_EQ(encode_payload(msg::FileInfo{258}), (Bytes{0x00, 0x00, 0x01, 0x02}));
  EXPECT_EQ(encode_payload(msg::GetReq{"ab"}), (Bytes{0x00, 0x02, 'a', 'b'}));
  EXPECT_TRUE(encode_payload(msg::PutCommit{}).empty());
  EXPECT_TRUE(encode_payload(msg::Bye{}).empty());
  EXPECT_EQ(encode_payload(msg::Hello{"cli"}), to_bytes("cli"));
}

TEST(DecodePayload, EmptyCommit) {
  auto r = decode_payload(0x12, {});
  ASSERT_TRUE(payload_value(r));
  EXPECT_TRUE(std::holds_alternative<msg::PutCommit>(*payload_value(r)));
}

TEST(DecodePayload, ShortFilenameNamesTheField) {
  auto r = decode_payload(0x10, Bytes{0x00, 0x05, 0x61});
  ASSERT_TRUE(payload_error(r));
  EXPECT_EQ(payload_error(r)->field, "filename");
}

TEST(DecodePayload, MalformedBodies) {
  auto field = [](std::uint8_t op, Bytes body) {
    auto r = decode_payload(op, body);
    return payload_error(r) ? payload_error(r)->field : std::string("<ok>");
  };
  Bytes name_only{0x00, 0x01, 'a'};
  EXPECT_EQ(field(0x10, name_only), "file_size");
  Bytes with_size = name_only;
  put_u32(with_size, 1);
  EXPECT_EQ(field(0x10, with_size), "block_size");
  Bytes full = with_size;
  put_u16(full, 1);
  EXPECT_EQ(field(0x10, full), "<ok>");
  full.push_back(0);
  EXPECT_EQ(field(0x10, full), "trailing");
  EXPECT_EQ(field(0x11, Bytes{0, 0, 0}), "block_index");
  EXPECT_NE(field(0x12, Bytes{0}), "<ok>");
  EXPECT_NE(field(0x7F, Bytes{0}), "<ok>");
  EXPECT_NE(field(0x21, Bytes{0, 0, 0}), "<ok>");
  EXPECT_NE(field(0x03, Bytes{}), "<ok>");
  EXPECT_EQ(field(0x01, Bytes{0xFF}), "client_id");
  EXPECT_EQ(field(0x20, Bytes{0x00, 0x01, 0xFF}), "filename");
}

class RoundTrip : public ::testing::TestWithParam<Opcode> {};

TEST_P(RoundTrip, ThousandRandomInstances) {
  testing::Rng rng(static_cast<std::uint64_t>(GetParam()) * 7919);
  for (int i = 0; i < 1000; ++i) {
    const auto original = testing::random_payload(rng, GetParam());
    ASSERT_EQ(opcode_of(original), GetParam());
    const auto body = encode_payload(original);
    auto decoded = decode_payload(static_cast<std::uint8_t>(GetParam()), body);
    ASSERT_TRUE(payload_value(decoded)) << summarize(original);
    EXPECT_EQ(*payload_value(decoded), original);

    auto report = decode_frame(encode_message(original));
    ASSERT_TRUE(report.well_formed());
    EXPECT_EQ(report.frame->payload, body);
  }
}

INSTANTIATE_TEST_SUITE_P(EveryOpcode, RoundTrip, ::testing::ValuesIn(testing::kAllOpcodes),
                         [](const auto& info) { return opcode_name(static_cast<std::uint8_t>(info.param)); });

TEST(DecodePayload, FuzzReturnsValueOrFieldError) {
  testing::Rng rng(11);
  for (int i = 0; i < 20000; ++i) {
    const auto op = static_cast<std::uint8_t>(testing::kAllOpcodes[i % 9]);
    auto body = testing::random_bytes(rng, 40);
    auto r = decode_payload(op, body);
    if (const auto* v = payload_value(r)) {
      EXPECT_EQ(encode_payload(*v), body);  // accepted bodies are canonical
    } else {
      EXPECT_FALSE(payload_error(r)->field.empty());
    }
  }
}

TEST(Summarize, ReadableLine) {
  EXPECT_EQ(summarize(msg::PutReq{"a.txt", 10, 4}), "PUT_REQ filename=\"a.txt\" file_size=10 block_size=4");
}

}  // namespace
}  // namespace cft
