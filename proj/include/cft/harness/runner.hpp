#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cft/client/session.hpp"
#include "cft/harness/cases.hpp"
#include "cft/server/server.hpp"

namespace cft::harness {

enum class VerdictKind { VulnerableConfirmed, Secure, Inconclusive };

std::string_view verdict_name(VerdictKind kind);  // VULNERABLE_CONFIRMED, SECURE, INCONCLUSIVE

struct Verdict {
  VerdictKind kind = VerdictKind::Inconclusive;
  std::string reason;
};

/// Reads the target's simulated-crash counter; nullopt when the target cannot report it.
using CrashProbe = std::function<std::optional<std::uint64_t>()>;

struct Target {
  std::string name;
  net::Endpoint endpoint;
  /// Flaws the target is expected to carry; drives the expected verdict in a suite.
  server::FlawSet expected_flaws;
  std::string canary{server::kDefaultCanary};
  CrashProbe crash_probe;
  /// When known, replies are awaited for read_timeout + 1 s.
  std::optional<Millis> read_timeout;
  CaseContext context;
};

struct RunOptions {
  Millis receive_timeout = client::kDefaultReceiveTimeout;  // used when the target's read_timeout is unknown
  Millis connect_timeout = client::kDefaultConnectTimeout;
  trace::TraceSink* trace = nullptr;
  std::size_t evidence_limit = 600;  // entries kept per case
};

struct Evidence {
  enum class Kind { Sent, Event, Note };
  Kind kind = Kind::Note;
  std::size_t step = 0;
  std::string detail;
  Bytes bytes;
};

std::string_view evidence_kind_name(Evidence::Kind kind);

struct CaseResult {
  Verdict verdict;
  std::vector<Evidence> evidence;
  std::size_t evidence_dropped = 0;
  std::optional<std::uint64_t> crash_delta;
  std::size_t err_replies = 0;
  std::chrono::milliseconds elapsed{0};
};

CaseResult run_case(const AttackCase& attack, const Target& target, const RunOptions& options = {});

/// True when `bytes` holds any min(8, |canary|)-byte window of the canary repeated end to end.
bool contains_canary_fragment(ByteView bytes, std::string_view canary);

/// The N of an Ok reply of the form "...client id N bytes", if present.
std::optional<std::size_t> reported_id_length(std::string_view ok_message);

// Suite ----------------------------------------------------------------------

struct CaseOutcome {
  std::string case_id;
  Category category = Category::BVA;
  std::optional<server::Flaw> targets_flaw;
  std::string target;
  VerdictKind expected = VerdictKind::Secure;
  CaseResult result;

  bool passed() const { return result.verdict.kind == expected; }
};

struct SuiteReport {
  std::vector<CaseOutcome> outcomes;  // grouped by target, builtin case order within a target
  std::chrono::milliseconds elapsed{0};

  bool passed() const;
  std::size_t confirmations() const;  // VULNERABLE_CONFIRMED where expected
  std::size_t failures() const;
  std::size_t failures_on(std::string_view target) const;
  const CaseOutcome* find(std::string_view case_id, std::string_view target) const;
};

struct SuiteOptions {
  RunOptions run;
  std::size_t jobs = 1;  // > 1 runs cases that touch no shared server state concurrently
  std::function<bool(const AttackCase&)> filter;
  /// Called after each case finishes; may be invoked from worker threads, never concurrently.
  std::function<void(const CaseOutcome&)> progress;
};

/// The verdict a suite requires of `attack` against a target carrying `flaws`.
VerdictKind expected_verdict(const AttackCase& attack, const server::FlawSet& flaws);

/// Runs every builtin case (built per target) against each target in turn.
SuiteReport run_suite(const std::vector<Target>& targets, const SuiteOptions& options = {});

// In-process targets -----------------------------------------------------------

struct HostedOptions {
  std::string canary{server::kDefaultCanary};
  Millis read_timeout{2000};
  std::uint64_t max_file_size = server::kDefaultMaxFileSize;
};

/// A server on 127.0.0.1 with a private temporary directory, removed on destruction.
class HostedServer {
 public:
  HostedServer(std::string name, server::FlawSet flaws, const HostedOptions& options = {});
  ~HostedServer();
  HostedServer(const HostedServer&) = delete;
  HostedServer& operator=(const HostedServer&) = delete;

  Target target() const;
  server::Server& server() { return *server_; }
  const std::filesystem::path& root() const { return root_; }

 private:
  std::string name_;
  std::filesystem::path base_;
  std::filesystem::path root_;
  std::unique_ptr<server::Server> server_;
};

}  // namespace cft::harness
