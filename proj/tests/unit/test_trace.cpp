#include <gtest/gtest.h>

#include <fstream>

#include "cft/harness/cases.hpp"
#include "cft/harness/runner.hpp"
#include "cft/trace/trace.hpp"
#include "scratch.hpp"

namespace cft::trace {
namespace {

using testing::ScratchDir;

LoadedTrace loaded(std::vector<TraceRecord> records) { return LoadedTrace{std::move(records), {}}; }

TEST(Format, RecordLine) {
  EXPECT_EQ(format_record({12, Direction::ServerToClient, {0x46, 0xAB}}), "12 S2C 46ab");
}

TEST(Sinks, MemoryKeepsOrderAndSkipsEmpty) {
  MemoryTraceSink sink;
  sink.record(Direction::ClientToServer, to_bytes("ab"));
  sink.record(Direction::ServerToClient, {});
  sink.record(Direction::ServerToClient, to_bytes("c"));
  sink.record(Direction::ClientToServer, to_bytes("d"));
  const auto records = sink.records();
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(sink.stream(Direction::ClientToServer), to_bytes("abd"));
  EXPECT_EQ(sink.stream(Direction::ServerToClient), to_bytes("c"));
  for (std::size_t i = 1; i < records.size(); ++i) EXPECT_LE(records[i - 1].timestamp_ms, records[i].timestamp_ms);
}

TEST(Sinks, FileRoundTrip) {
  ScratchDir dir;
  const auto path = dir.path() / "t.trace";
  {
    FileTraceSink sink(path);
    sink.record(Direction::ClientToServer, encode_message(msg::Hello{"x"}));
    sink.record(Direction::ServerToClient, encode_message(msg::Ok{"hi"}));
  }
  const auto before = testing::read_file(path);
  const auto mtime = std::filesystem::last_write_time(path);
  auto trace = load_trace(path);
  EXPECT_TRUE(trace.corrupt.empty());
  ASSERT_EQ(trace.records.size(), 2u);
  EXPECT_EQ(trace.records[0].bytes, encode_message(msg::Hello{"x"}));
  EXPECT_EQ(trace.records[1].direction, Direction::ServerToClient);
  (void)render(review(trace));
  EXPECT_EQ(testing::read_file(path), before);
  EXPECT_EQ(std::filesystem::last_write_time(path), mtime);
}

TEST(Sinks, UnopenablePathThrows) {
  EXPECT_THROW(FileTraceSink("/definitely/not/here/x.trace"), TraceError);
  EXPECT_THROW(load_trace("/definitely/not/here/x.trace"), TraceError);
}

TEST(Sinks, FailedWriteThrows) {
  if (!std::filesystem::exists("/dev/full")) GTEST_SKIP() << "no /dev/full";
  FileTraceSink sink("/dev/full");
  EXPECT_THROW(sink.record(Direction::ClientToServer, Bytes(8192, 0x41)), TraceError);
}

TEST(Parse, CorruptLinesFlaggedRestKept) {
  const std::string text = "0 C2S " + to_hex(encode_message(msg::Bye{})) + "\n" +
                           "garbage line\n"
                           "5 XYZ 00\n"
                           "6 S2C 0g\n"
                           "\n"
                           "7 S2C " + to_hex(encode_message(msg::Ok{"bye"})) + "\n";
  auto trace = parse_trace(text);
  EXPECT_EQ(trace.records.size(), 2u);
  ASSERT_EQ(trace.corrupt.size(), 3u);
  EXPECT_EQ(trace.corrupt[0].line_number, 2u);
  auto listing = review(trace);
  EXPECT_EQ(listing.frame_count(), 2u);
  EXPECT_EQ(listing.violation_count(), 0u);
}

TEST(Review, HelloOkIsClean) {
  auto listing = review(loaded({{0, Direction::ClientToServer, encode_message(msg::Hello{"x"})},
                                {1, Direction::ServerToClient, encode_message(msg::Ok{"welcome"})}}));
  EXPECT_EQ(listing.frame_count(), 2u);
  EXPECT_EQ(listing.violation_count(), 0u);
  EXPECT_EQ(listing.residue_bytes(), 0u);
  const auto text = render(listing);
  EXPECT_NE(text.find("HELLO"), std::string::npos);
  EXPECT_NE(text.find("OK"), std::string::npos);
}

TEST(Review, EmptyTrace) {
  auto listing = review(parse_trace(""));
  EXPECT_TRUE(listing.entries.empty());
  EXPECT_EQ(render(listing), "");
}

TEST(Review, InflatedLengthShowsMismatchAndResidue) {
  auto hello = encode_message(msg::Hello{"lenup"});
  hello[7] += 5;
  Bytes stream = hello;
  const auto bye = encode_message(msg::Bye{});
  stream.insert(stream.end(), bye.begin(), bye.end());
  auto listing = review(loaded({{0, Direction::ClientToServer, stream}}));
  EXPECT_TRUE(listing.has_violation(ViolationKind::LengthMismatch)) << render(listing);
  EXPECT_GT(listing.residue_bytes(), 0u) << render(listing);
}

TEST(Review, SplitRecordsJoinIntoFrames) {
  const auto frame = encode_message(msg::PutReq{"a.txt", 10, 4});
  std::vector<TraceRecord> records;
  for (std::size_t i = 0; i < frame.size(); ++i) records.push_back({i, Direction::ClientToServer, {frame[i]}});
  auto listing = review(loaded(records));
  EXPECT_EQ(listing.frame_count(), 1u);
  EXPECT_EQ(listing.violation_count(), 0u);
}

TEST(Review, CrashTraceKeepsEarlierFrames) {
  harness::HostedOptions options;
  options.read_timeout = Millis{300};
  harness::HostedServer hosted("trace", server::FlawSet::only(server::Flaw::F2OverrunLeak), options);
  const auto target = hosted.target();
  const auto attack = harness::find_case("C-OVR-L", target.context);
  ASSERT_TRUE(attack);

  ScratchDir dir;
  const auto path = dir.path() / "ovr.trace";
  {
    FileTraceSink sink(path);
    harness::RunOptions run;
    run.trace = &sink;
    auto result = harness::run_case(*attack, target, run);
    EXPECT_EQ(result.verdict.kind, harness::VerdictKind::VulnerableConfirmed) << result.verdict.reason;
  }
  auto trace = load_trace(path);
  auto listing = review(trace);
  std::size_t c2s = 0;
  std::size_t s2c = 0;
  for (const auto& e : listing.entries) {
    if (const auto* f = std::get_if<FrameEntry>(&e)) (f->direction == Direction::ClientToServer ? c2s : s2c)++;
  }
  EXPECT_GE(c2s, 3u);  // HELLO, PUT_REQ, the oversized DATA
  EXPECT_GE(s2c, 2u);  // replies before the crash
}

}  // namespace
}  // namespace cft::trace
