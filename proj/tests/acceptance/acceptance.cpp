// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cft/client/session.hpp"
#include "cft/harness/cases.hpp"
#include "cft/harness/runner.hpp"
#include "cft/payload.hpp"
#include "cft/trace/trace.hpp"
#include "fuzz.hpp"
#include "generators.hpp"
#include "scratch.hpp"

namespace {

using namespace cft;
using Clock = std::chrono::steady_clock;
using server::Flaw;
using server::FlawSet;

struct Check {
  bool ok = true;
  std::ostringstream notes;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      notes << " [" << what << "]";
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int run_command(const std::string& command, std::string& output) {
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return -1;
  char buffer[4096];
  std::size_t n = 0;
  while ((n = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) output.append(buffer, n);
  const int raw = ::pclose(pipe);
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

using Verdicts = std::map<std::string, std::string>;  // "case@target" -> verdict

Verdicts read_report(const std::filesystem::path& path, std::map<std::string, bool>* passed = nullptr) {
  Verdicts verdicts;
  std::istringstream in(testing::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto key = j["id"].get<std::string>() + "@" + j["target"].get<std::string>();
    verdicts[key] = j["verdict"].get<std::string>();
    if (passed) (*passed)[key] = j["passed"].get<bool>();
  }
  return verdicts;
}

harness::HostedOptions quick() {
  harness::HostedOptions options;
  options.read_timeout = Millis{300};
  return options;
}

// 1 -------------------------------------------------------------------------
Check codec_soundness() {
  Check c;
  const auto start = Clock::now();
  testing::Rng rng(1);
  std::size_t round_trips = 0;
  for (auto op : testing::kAllOpcodes) {
    for (int i = 0; i < 1000; ++i) {
      const auto original = testing::random_payload(rng, op);
      const auto wire = encode_message(original);
      const auto report = decode_frame(wire);
      bool same = report.well_formed() && report.consumed == wire.size();
      if (same) {
        const auto back = decode_payload(report.frame->opcode, report.frame->payload);
        same = payload_value(back) && *payload_value(back) == original;
      }
      if (same) ++round_trips;
    }
  }
  c.require(round_trips == 9000, std::to_string(9000 - round_trips) + " round trips differ");

  std::size_t fuzzed = 0;
  try {
    for (int i = 0; i < 20000; ++i) {
      Bytes bytes = testing::random_bytes(rng, 64);
      if (i % 2 == 0 && bytes.size() >= 3) bytes[0] = 0x46, bytes[1] = 0x54, bytes[2] = 0x01;
      MemorySource source(bytes, 1 + i % 5);
      const auto report = decode_frame(source, Millis{5});
      if (report.frame) (void)decode_payload(report.frame->opcode, report.frame->payload);
      (void)decode_payload(static_cast<std::uint8_t>(testing::kAllOpcodes[i % 9]), bytes);
      ++fuzzed;
    }
  } catch (const std::exception& e) {
    c.require(false, std::string("decode threw: ") + e.what());
  }
  const auto took = seconds_since(start);
  c.require(took < 30, "took " + std::to_string(took) + " s");
  c.notes << " round_trips=" << round_trips << " fuzz_inputs=" << fuzzed << " seconds=" << took;
  return c;
}

// 2 -------------------------------------------------------------------------
Check differential_suite(const std::filesystem::path& report, Verdicts& verdicts) {
  Check c;
  const auto start = Clock::now();
  std::string output;
  const int status = run_command(std::string(CFTBENCH_PATH) + " suite --self-hosted --quiet --report " + report.string(), output);
  const auto took = seconds_since(start);
  c.require(status == 0, "exit status " + std::to_string(status));
  c.require(output.find("suite PASS") != std::string::npos, "no suite PASS line");
  std::map<std::string, bool> passed;
  try {
    verdicts = read_report(report, &passed);
  } catch (const std::exception& e) {
    c.require(false, std::string("report unreadable: ") + e.what());
  }
  for (const char* id : {"C-PUT-OK", "C-BULK"}) {
    for (const char* target : {"flawed", "hardened"}) {
      const auto key = std::string(id) + "@" + target;
      c.require(verdicts[key] == "SECURE" && passed[key], key + " " + verdicts[key]);
    }
  }
  std::size_t failed = 0;
  for (const auto& [key, ok] : passed) failed += !ok;
  c.require(failed == 0, std::to_string(failed) + " case runs failed");
  c.require(took < 120, "took " + std::to_string(took) + " s");
  c.notes << " case_runs=" << verdicts.size() << " seconds=" << took;
  return c;
}

// 3 -------------------------------------------------------------------------
Check per_flaw_isolation() {
  Check c;
  const auto start = Clock::now();
  for (auto flaw : server::kAllFlaws) {
    harness::HostedServer hosted("only-" + server::flaw_id(flaw), FlawSet::only(flaw), quick());
    const auto report = harness::run_suite({hosted.target()});
    std::size_t flipped = 0;
    std::size_t targeted = 0;
    for (const auto& o : report.outcomes) {
      const bool targets = o.targets_flaw == flaw;
      targeted += targets;
      const bool vulnerable = o.result.verdict.kind == harness::VerdictKind::VulnerableConfirmed;
      const bool secure = o.result.verdict.kind == harness::VerdictKind::Secure;
      flipped += vulnerable;
      c.require(targets ? vulnerable : secure, server::flaw_id(flaw) + ":" + o.case_id + " " +
                                                   std::string(harness::verdict_name(o.result.verdict.kind)));
    }
    c.notes << " " << server::flaw_id(flaw) << "=" << flipped << "/" << targeted;
  }
  const auto took = seconds_since(start);
  c.require(took < 300, "took " + std::to_string(took) + " s");
  c.notes << " seconds=" << took;
  return c;
}

// 4 -------------------------------------------------------------------------
Check hardened_fuzz() {
  Check c;
  const auto start = Clock::now();
  harness::HostedOptions options;
  options.max_file_size = 64 * 1024;
  harness::HostedServer hosted("fuzz", FlawSet::hardened(), options);
  testing::plant_fuzz_seed(hosted.root());
  const auto outcome = testing::run_hardened_fuzz(hosted.target().endpoint, hosted.root(), options.max_file_size,
                                                  options.canary, 10000, 404);
  const auto took = seconds_since(start);
  c.require(outcome.streams == 10000, "streams " + std::to_string(outcome.streams));
  c.require(outcome.canary_hits == 0, std::to_string(outcome.canary_hits) + " canary hits");
  c.require(hosted.server().crash_count() == 0, "crashes " + std::to_string(hosted.server().crash_count()));
  c.require(outcome.mismatched_streams == 0,
            std::to_string(outcome.mismatched_streams) + " streams differ from the model" +
                (outcome.failures.empty() ? "" : ": " + outcome.failures.front()));
  c.require(took < 120, "took " + std::to_string(took) + " s");
  c.notes << " streams=" << outcome.streams << " frames=" << outcome.frames << " nonconforming=" << outcome.nonconforming
          << " err_replies=" << outcome.err_replies << " partially_predicted=" << outcome.partially_predicted
          << " seconds=" << took;
  return c;
}

// 5 -------------------------------------------------------------------------
Check repeatability(const Verdicts& first, const std::filesystem::path& report) {
  Check c;
  std::string output;
  const int status = run_command(std::string(CFTBENCH_PATH) + " suite --self-hosted --quiet --report " + report.string(), output);
  c.require(status == 0, "second run exit status " + std::to_string(status));
  Verdicts second;
  try {
    second = read_report(report);
  } catch (const std::exception& e) {
    c.require(false, std::string("report unreadable: ") + e.what());
  }
  c.require(!first.empty() && first == second, "verdicts differ between runs");

  std::size_t non_secure = 0;
  std::size_t runs = 0;
  for (int i = 0; i < 20; ++i) {
    harness::HostedServer hosted("hardened", FlawSet::hardened(), quick());
    for (const auto& o : harness::run_suite({hosted.target()}).outcomes) {
      ++runs;
      if (o.result.verdict.kind != harness::VerdictKind::Secure) {
        ++non_secure;
        c.require(false, "run " + std::to_string(i) + " " + o.case_id + ": " + o.result.verdict.reason);
      }
    }
  }
  c.notes << " compared=" << second.size() << " hardened_case_runs=" << runs << " non_secure=" << non_secure;
  return c;
}

// 6 -------------------------------------------------------------------------
Check trace_fidelity() {
  Check c;
  harness::HostedServer hosted("trace", FlawSet::only(Flaw::F3LengthSmearing), quick());
  const auto target = hosted.target();
  const auto attack = harness::find_case("C-LEN-UP", target.context);
  if (!attack) {
    c.require(false, "C-LEN-UP missing");
    return c;
  }
  trace::MemoryTraceSink sink;
  harness::RunOptions options;
  options.trace = &sink;
  const auto result = harness::run_case(*attack, target, options);
  c.require(result.verdict.kind == harness::VerdictKind::VulnerableConfirmed, "verdict " + result.verdict.reason);

  Bytes resolved;
  for (const auto& s : attack->script) {
    if (const auto* f = std::get_if<harness::step::SendFrame>(&s)) {
      const auto bytes = f->spec.resolve();
      resolved.insert(resolved.end(), bytes.begin(), bytes.end());
    }
  }
  const auto captured = sink.stream(trace::Direction::ClientToServer);
  c.require(captured == resolved, "captured " + std::to_string(captured.size()) + " bytes, resolved " +
                                      std::to_string(resolved.size()));

  const auto listing = trace::review(trace::LoadedTrace{sink.records(), {}});
  c.require(listing.has_violation(ViolationKind::LengthMismatch), "no length mismatch flagged");
  c.require(listing.residue_bytes() > 0, "no residue shown");
  c.notes << " c2s_bytes=" << captured.size() << " frames=" << listing.frame_count()
          << " residue_bytes=" << listing.residue_bytes();
  return c;
}

// 7 -------------------------------------------------------------------------
Check crash_isolation() {
  Check c;
  harness::HostedServer hosted("isolation", FlawSet::only(Flaw::F2OverrunLeak), quick());
  const auto target = hosted.target();

  Bytes content(4000);
  for (std::size_t i = 0; i < content.size(); ++i) content[i] = static_cast<std::uint8_t>(i * 7);
  const std::uint16_t block = 500;

  auto honest = client::Session::connect(target.endpoint);
  auto ok = [](const client::ServerEvent& e) {
    const auto* r = std::get_if<client::Reply>(&e);
    return r != nullptr && r->is_ok();
  };
  bool steps_ok = ok(honest.hello("bystander"));
  honest.send(msg::PutReq{"inflight.bin", static_cast<std::uint32_t>(content.size()), block});
  steps_ok = steps_ok && ok(honest.receive());
  auto send_block = [&](std::uint32_t index) {
    const auto begin = content.begin() + index * block;
    honest.send(msg::Data{index, Bytes(begin, begin + block)});
    return ok(honest.receive());
  };
  for (std::uint32_t i = 0; i < 4; ++i) steps_ok = steps_ok && send_block(i);

  // The other session crashes while this transfer is half done.
  const auto attack = harness::run_case(*harness::find_case("C-OVR-L", target.context), target);
  c.require(attack.verdict.kind == harness::VerdictKind::VulnerableConfirmed, "C-OVR-L " + attack.verdict.reason);
  c.require(hosted.server().crash_count() == 1, "crash count " + std::to_string(hosted.server().crash_count()));

  for (std::uint32_t i = 4; i < 8; ++i) steps_ok = steps_ok && send_block(i);
  honest.send(msg::PutCommit{});
  steps_ok = steps_ok && ok(honest.receive());
  c.require(steps_ok, "honest PUT got a non-Ok reply");
  c.require(to_bytes(testing::read_file(hosted.root() / "inflight.bin")) == content, "stored file differs");
  c.notes << " crashes=" << hosted.server().crash_count();
  return c;
}

}  // namespace

int main() {
  testing::ScratchDir dir;
  Verdicts first;
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"1 codec-soundness", codec_soundness},
      {"2 differential-suite", [&] { return differential_suite(dir.path() / "first.jsonl", first); }},
      {"3 per-flaw-isolation", per_flaw_isolation},
      {"4 hardened-fuzz", hardened_fuzz},
      {"5 repeatability", [&] { return repeatability(first, dir.path() / "second.jsonl"); }},
      {"6 trace-fidelity", trace_fidelity},
      {"7 crash-isolation", crash_isolation},
  };
  bool all = true;
  for (const auto& [name, run] : criteria) {
    Check check;
    try {
      check = run();
    } catch (const std::exception& e) {
      check.require(false, std::string("exception: ") + e.what());
    }
    all = all && check.ok;
    std::cout << (check.ok ? "PASS " : "FAIL ") << name << check.notes.str() << std::endl;
  }
  return all ? 0 : 1;
}
