#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "cft/harness/bva.hpp"
#include "cft/harness/cases.hpp"
#include "cft/harness/report.hpp"
#include "cft/harness/runner.hpp"
#include "scratch.hpp"

namespace cft::harness {
namespace {

using server::Flaw;
using server::FlawSet;

// Bva -----------------------------------------------------------------------

TEST(Bva, SixteenBitField) {
  EXPECT_EQ(bva_values({16, 1, 4096, 512}),
            (std::vector<std::uint64_t>{0, 1, 2, 512, 4095, 4096, 4097, 32767, 32768, 65535}));
}

TEST(Bva, FullRangeField) {
  EXPECT_EQ(bva_values({32, 0, 0, 0}), (std::vector<std::uint64_t>{0, 1, 2147483647, 2147483648, 4294967295}));
}

TEST(Bva, NeverLeavesWidth) {
  for (unsigned width : {16u, 32u}) {
    const std::uint64_t top = (std::uint64_t{1} << width) - 1;
    for (auto field : {NumericField{width, 0, top, 7}, NumericField{width, top, top, top}, NumericField{width, 3, 9, 5}}) {
      auto values = bva_values(field);
      EXPECT_TRUE(std::is_sorted(values.begin(), values.end()));
      EXPECT_EQ(std::set<std::uint64_t>(values.begin(), values.end()).size(), values.size());
      for (auto v : values) EXPECT_LE(v, top);
      EXPECT_TRUE(std::count(values.begin(), values.end(), field.min));
      EXPECT_TRUE(std::count(values.begin(), values.end(), field.max));
    }
  }
}

TEST(Bva, RejectsBadFields) {
  EXPECT_THROW(bva_values({8, 0, 1, 0}), std::invalid_argument);
  EXPECT_THROW(bva_values({16, 5, 4, 4}), std::invalid_argument);
  EXPECT_THROW(bva_values({16, 0, 70000, 1}), std::invalid_argument);
}

// Catalog -------------------------------------------------------------------

CaseContext rooted() { return CaseContext{std::filesystem::path("/srv/cft/root"), server::kDefaultMaxFileSize}; }

TEST(Catalog, CoversEveryCategoryWithUniqueIds) {
  const auto cases = builtin_cases(rooted());
  std::set<std::string> ids;
  std::set<Category> categories;
  for (const auto& c : cases) {
    EXPECT_TRUE(ids.insert(c.id).second) << c.id;
    categories.insert(c.category);
    EXPECT_FALSE(c.script.empty()) << c.id;
    EXPECT_FALSE(c.unavailable) << c.id;
  }
  EXPECT_EQ(categories.size(), kCategoryCount);
  for (const char* id : {"C-PUT-OK", "C-BULK", "C-DIR-1", "C-OVR-L", "C-LEN-UP", "C-NUM-BS-0", "C-NUM-FS-NEG",
                         "C-SEQ-DATA-BEFORE-HELLO", "C-OPC-UNKNOWN", "C-LONG-1", "C-MISSING-FILENAME"}) {
    EXPECT_TRUE(ids.count(id)) << id;
  }
}

TEST(Catalog, EveryFlawTargetedWithMatchingSignature) {
  std::set<Flaw> targeted;
  for (const auto& c : builtin_cases(rooted())) {
    if (!c.targets_flaw) continue;
    targeted.insert(*c.targets_flaw);
    EXPECT_TRUE(signature_matches_flaw(c)) << c.id << " " << signature_name(c.signature);
  }
  EXPECT_EQ(targeted.size(), server::kAllFlaws.size());
}

TEST(Catalog, AbsolutePathCaseNeedsRoot) {
  auto dir2 = find_case("C-DIR-2");
  ASSERT_TRUE(dir2);
  EXPECT_TRUE(dir2->unavailable);
  auto rooted_dir2 = find_case("C-DIR-2", rooted());
  ASSERT_TRUE(rooted_dir2);
  EXPECT_FALSE(rooted_dir2->unavailable);
  EXPECT_FALSE(find_case("C-NOPE"));
}

TEST(Catalog, UnknownOpcodeCaseSendsEveryUndefinedOpcode) {
  auto c = find_case("C-OPC-UNKNOWN");
  ASSERT_TRUE(c);
  std::set<std::uint8_t> sent;
  for (const auto& s : c->script) {
    if (const auto* f = std::get_if<step::SendFrame>(&s)) sent.insert(f->spec.opcode);
  }
  for (int op = 0; op < 256; ++op) {
    if (!is_known_opcode(static_cast<std::uint8_t>(op))) EXPECT_TRUE(sent.count(static_cast<std::uint8_t>(op))) << op;
  }
}

TEST(Helpers, CanaryFragment) {
  const std::string canary(server::kDefaultCanary);
  EXPECT_TRUE(contains_canary_fragment(to_bytes("xx" + canary.substr(3, 8) + "yy"), canary));
  // Windows that wrap around the end of the canary count too.
  EXPECT_TRUE(contains_canary_fragment(to_bytes(canary.substr(canary.size() - 4) + canary.substr(0, 4)), canary));
  EXPECT_FALSE(contains_canary_fragment(to_bytes(canary.substr(0, 7)), canary));
  EXPECT_FALSE(contains_canary_fragment({}, canary));
}

TEST(Helpers, ReportedIdLength) {
  EXPECT_EQ(reported_id_length("welcome; client id 12 bytes"), 12u);
  EXPECT_FALSE(reported_id_length("welcome"));
}

TEST(Expected, VerdictFollowsFlaws) {
  auto c = find_case("C-DIR-1");
  ASSERT_TRUE(c);
  EXPECT_EQ(expected_verdict(*c, FlawSet::only(Flaw::F1PathTraversal)), VerdictKind::VulnerableConfirmed);
  EXPECT_EQ(expected_verdict(*c, FlawSet::only(Flaw::F2OverrunLeak)), VerdictKind::Secure);
  auto put = find_case("C-PUT-OK");
  EXPECT_EQ(expected_verdict(*put, FlawSet::vulnerable()), VerdictKind::Secure);
}

// Running cases -------------------------------------------------------------

HostedOptions quick() {
  HostedOptions options;
  options.read_timeout = Millis{300};
  return options;
}

TEST(RunCase, DirectoryTraversalConfirmedOnF1) {
  HostedServer hosted("f1", FlawSet::only(Flaw::F1PathTraversal), quick());
  auto target = hosted.target();
  auto result = run_case(*find_case("C-DIR-1", target.context), target);
  EXPECT_EQ(result.verdict.kind, VerdictKind::VulnerableConfirmed) << result.verdict.reason;
  bool canary_seen = false;
  for (const auto& e : result.evidence) {
    if (contains_canary_fragment(e.bytes, target.canary)) canary_seen = true;
  }
  EXPECT_TRUE(canary_seen);
}

TEST(RunCase, DirectoryTraversalSecureWhenHardened) {
  HostedServer hosted("hard", FlawSet::hardened(), quick());
  auto target = hosted.target();
  auto result = run_case(*find_case("C-DIR-1", target.context), target);
  EXPECT_EQ(result.verdict.kind, VerdictKind::Secure) << result.verdict.reason;
  EXPECT_GE(result.err_replies, 1u);
  bool denied = false;
  for (const auto& e : result.evidence) {
    if (e.detail.find("PATH_DENIED") != std::string::npos) denied = true;
  }
  EXPECT_TRUE(denied);
}

TEST(RunCase, OverrunCrashCounted) {
  HostedServer hosted("f2", FlawSet::only(Flaw::F2OverrunLeak), quick());
  auto target = hosted.target();
  auto result = run_case(*find_case("C-OVR-L", target.context), target);
  EXPECT_EQ(result.verdict.kind, VerdictKind::VulnerableConfirmed) << result.verdict.reason;
  EXPECT_EQ(result.crash_delta, 1u);
  EXPECT_EQ(hosted.server().crash_count(), 1u);
}

TEST(RunCase, UnreachableTargetIsInconclusive) {
  auto listener = net::listen_tcp({"127.0.0.1", 0});
  Target target;
  target.name = "gone";
  target.endpoint = net::local_endpoint(listener);
  listener.close();
  RunOptions options;
  options.connect_timeout = Millis{300};
  auto result = run_case(*find_case("C-PUT-OK"), target, options);
  EXPECT_EQ(result.verdict.kind, VerdictKind::Inconclusive);
  EXPECT_FALSE(result.verdict.reason.empty());
}

TEST(RunCase, UnavailableCaseIsInconclusive) {
  HostedServer hosted("hard", FlawSet::hardened(), quick());
  auto target = hosted.target();
  target.context.sandbox_root.reset();
  auto result = run_case(*find_case("C-DIR-2", target.context), target);
  EXPECT_EQ(result.verdict.kind, VerdictKind::Inconclusive);
}

// Suites --------------------------------------------------------------------

std::vector<std::string> pick = {"C-PUT-OK", "C-DIR-1", "C-OVR-S", "C-OVR-L", "C-LEN-UP", "C-NUM-BS-0",
                                 "C-SEQ-DATA-BEFORE-PUTREQ", "C-OPC-UNKNOWN", "C-MISSING-FILENAME"};

SuiteOptions picked(std::size_t jobs = 1) {
  SuiteOptions options;
  options.jobs = jobs;
  options.filter = [](const AttackCase& c) { return std::count(pick.begin(), pick.end(), c.id) > 0; };
  return options;
}

TEST(Suite, PassesAgainstMatchingTargets) {
  HostedServer flawed("flawed", FlawSet::vulnerable(), quick());
  HostedServer hardened("hardened", FlawSet::hardened(), quick());
  auto report = run_suite({flawed.target(), hardened.target()}, picked());
  EXPECT_EQ(report.outcomes.size(), 2 * pick.size());
  for (const auto& o : report.outcomes) EXPECT_TRUE(o.passed()) << o.case_id << "@" << o.target << ": " << o.result.verdict.reason;
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.confirmations(), pick.size() - 2);

  ASSERT_NE(report.find("C-DIR-1", "flawed"), nullptr);
  EXPECT_EQ(report.find("C-DIR-1", "hardened")->result.verdict.kind, VerdictKind::Secure);

  std::ostringstream summary;
  print_summary(summary, report);
  EXPECT_NE(summary.str().find("suite PASS"), std::string::npos);
}

TEST(Suite, HardenedServerPosingAsFlawedFails) {
  HostedServer impostor("impostor", FlawSet::hardened(), quick());
  auto target = impostor.target();
  target.expected_flaws = FlawSet::vulnerable();
  auto report = run_suite({target}, picked());
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.failures_on(target.name), pick.size() - 2);
  std::ostringstream summary;
  print_summary(summary, report);
  EXPECT_NE(summary.str().find("suite FAIL"), std::string::npos);
}

TEST(Suite, ParallelRunGivesSameVerdicts) {
  auto verdicts = [](std::size_t jobs) {
    HostedServer flawed("flawed", FlawSet::vulnerable(), quick());
    HostedServer hardened("hardened", FlawSet::hardened(), quick());
    auto report = run_suite({flawed.target(), hardened.target()}, picked(jobs));
    std::vector<std::pair<std::string, VerdictKind>> out;
    for (const auto& o : report.outcomes) out.emplace_back(o.case_id + "@" + o.target, o.result.verdict.kind);
    return out;
  };
  EXPECT_EQ(verdicts(1), verdicts(4));
}

TEST(Report, JsonLinesParse) {
  HostedServer flawed("flawed", FlawSet::vulnerable(), quick());
  auto report = run_suite({flawed.target()}, picked());
  testing::ScratchDir dir;
  const auto path = dir.path() / "report.jsonl";
  write_report(path, report);
  std::istringstream in(testing::read_file(path));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("id"));
    EXPECT_TRUE(j.contains("verdict"));
    EXPECT_TRUE(j["evidence"].is_array());
    EXPECT_EQ(j["target"], "flawed");
    ++lines;
  }
  EXPECT_EQ(lines, report.outcomes.size());
}

}  // namespace
}  // namespace cft::harness
