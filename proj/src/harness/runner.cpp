#include "cft/harness/runner.hpp"

#include <stdlib.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <mutex>
#include <thread>

namespace cft::harness {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using Clock = std::chrono::steady_clock;

constexpr std::size_t kEvidenceBytes = 96;

std::string describe_sent(const Bytes& bytes) {
  auto report = decode_frame(bytes);
  std::string text;
  if (report.well_formed()) {
    auto decoded = decode_payload(report.frame->opcode, report.frame->payload);
    if (const auto* value = payload_value(decoded)) {
      text = summarize(*value);
    } else {
      text = opcode_name(report.frame->opcode) + " with malformed payload (" + payload_error(decoded)->field + ")";
    }
  } else {
    const std::uint8_t op = bytes.size() > 3 ? bytes[3] : 0;
    text = "forged " + opcode_name(op);
    for (const auto& v : report.violations) text += " [" + std::string(violation_name(v.kind)) + "]";
  }
  return text + ", " + std::to_string(bytes.size()) + " bytes";
}

Bytes clip(ByteView bytes) {
  return Bytes(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min(bytes.size(), kEvidenceBytes)));
}

class Recorder {
 public:
  Recorder(CaseResult& result, std::size_t limit) : result_(result), limit_(limit) {}

  void add(Evidence::Kind kind, std::size_t step, std::string detail, ByteView bytes = {}) {
    if (result_.evidence.size() >= limit_) {
      ++result_.evidence_dropped;
      return;
    }
    result_.evidence.push_back({kind, step, std::move(detail), clip(bytes)});
  }

  void event(std::size_t step, const client::ServerEvent& event) {
    ByteView bytes;
    if (const auto* r = std::get_if<client::Reply>(&event); r && r->report.frame) bytes = r->report.frame->payload;
    add(Evidence::Kind::Event, step, client::describe(event), bytes);
  }

 private:
  CaseResult& result_;
  std::size_t limit_;
};

struct Observation {
  std::size_t step = 0;
  Expectation expected;
  std::vector<client::ServerEvent> events;
  bool met = false;
};

std::optional<OpPayload> typed(const client::ServerEvent& event) {
  if (const auto* r = std::get_if<client::Reply>(&event); r && r->report.well_formed()) return r->payload();
  return std::nullopt;
}

bool meets(const Observation& o) {
  const auto& first = o.events.front();
  const auto* reply = std::get_if<client::Reply>(&first);
  if (reply == nullptr || !reply->report.well_formed()) return false;
  return std::visit(overloaded{
                        [&](const expect::Ok&) { return reply->is_ok(); },
                        [&](const expect::Err& e) {
                          return reply->err_code() == static_cast<std::uint8_t>(e.code);
                        },
                        [&](const expect::File& f) {
                          auto p = typed(first);
                          if (!p || !std::holds_alternative<msg::FileInfo>(*p)) return false;
                          Bytes content;
                          for (std::size_t i = 1; i < o.events.size(); ++i) {
                            auto d = typed(o.events[i]);
                            if (!d || !std::holds_alternative<msg::Data>(*d)) return false;
                            const auto& block = std::get<msg::Data>(*d).data;
                            content.insert(content.end(), block.begin(), block.end());
                          }
                          return content == f.content;
                        },
                    },
                    o.expected);
}

std::string mismatch_text(const Observation& o) {
  return "step " + std::to_string(o.step) + ": expected " + describe(o.expected) + ", got " +
         client::describe(o.events.front());
}

/// Executes a script and keeps every observation.
class CaseRun {
 public:
  CaseRun(const Target& target, const RunOptions& options, CaseResult& result)
      : target_(target), options_(options), recorder_(result, options.evidence_limit) {
    receive_timeout_ = target.read_timeout ? *target.read_timeout + Millis{1000} : options.receive_timeout;
  }

  bool open(std::size_t step) {
    session_.reset();
    try {
      session_.emplace(client::Session::connect(target_.endpoint, options_.trace, options_.connect_timeout));
    } catch (const client::ConnectError& e) {
      unreachable_ = std::string("unreachable: ") + e.what();
      return false;
    }
    session_->set_receive_timeout(receive_timeout_);
    recorder_.add(Evidence::Kind::Note, step, "connected to " + target_.endpoint.to_string());
    sent_on_connection_ = 0;
    dead_ = false;
    return true;
  }

  bool execute(const std::vector<Step>& script) {
    if (!open(0)) return false;
    for (std::size_t i = 0; i < script.size(); ++i) {
      const std::size_t step = i + 1;
      const bool ok = std::visit(overloaded{
                                     [&](const step::SendFrame& s) {
                                       send(step, s.spec);
                                       return true;
                                     },
                                     [&](const step::Expect& e) {
                                       observe(step, e.what);
                                       return true;
                                     },
                                     [&](const step::HonestPut& p) {
                                       honest_put(step, p);
                                       return true;
                                     },
                                     [&](const step::Reconnect&) { return open(step); },
                                 },
                                 script[i]);
      if (!ok) return false;
    }
    if (session_) session_->close();
    return true;
  }

  const std::vector<Observation>& observations() const { return observations_; }
  const std::string& unreachable() const { return unreachable_; }

 private:
  void send(std::size_t step, const client::RawFrameSpec& spec) {
    if (dead_) return;
    auto bytes = session_->send_raw(spec);
    ++sent_on_connection_;
    recorder_.add(Evidence::Kind::Sent, step, describe_sent(bytes), bytes);
  }

  client::ServerEvent receive(std::size_t step) {
    auto event = session_->receive(receive_timeout_);
    recorder_.event(step, event);
    if (std::holds_alternative<client::Closed>(event)) dead_ = true;
    return event;
  }

  bool observe(std::size_t step, const Expectation& expected) {
    Observation o{step, expected, {}, false};
    if (dead_) {
      o.events.emplace_back(client::Closed{});
      recorder_.add(Evidence::Kind::Note, step, "connection already closed");
    } else {
      o.events.push_back(receive(step));
      if (auto p = typed(o.events.front()); p && std::holds_alternative<msg::FileInfo>(*p)) {
        const auto size = std::get<msg::FileInfo>(*p).file_size;
        std::size_t got = 0;
        while (got < size) {
          auto event = receive(step);
          auto d = typed(event);
          o.events.push_back(std::move(event));
          if (!d || !std::holds_alternative<msg::Data>(*d) || std::get<msg::Data>(*d).data.empty()) break;
          got += std::get<msg::Data>(*d).data.size();
        }
      }
    }
    o.met = meets(o);
    observations_.push_back(std::move(o));
    return observations_.back().met;
  }

  void honest_put(std::size_t step, const step::HonestPut& put) {
    auto exchange = [&](const OpPayload& payload) {
      send(step, client::RawFrameSpec::honest(payload));
      return observe(step, expect::Ok{});
    };
    if (sent_on_connection_ == 0 && !exchange(msg::Hello{"cft-suite"})) return;
    if (!exchange(msg::PutReq{put.filename, static_cast<std::uint32_t>(put.content.size()), put.block_size})) return;
    const std::size_t bs = put.block_size;
    for (std::size_t offset = 0, index = 0; offset < put.content.size(); offset += bs, ++index) {
      const auto first = put.content.begin() + static_cast<std::ptrdiff_t>(offset);
      const auto last = put.content.begin() + static_cast<std::ptrdiff_t>(std::min(put.content.size(), offset + bs));
      if (!exchange(msg::Data{static_cast<std::uint32_t>(index), Bytes(first, last)})) return;
    }
    exchange(msg::PutCommit{});
  }

  const Target& target_;
  const RunOptions& options_;
  Recorder recorder_;
  Millis receive_timeout_;
  std::optional<client::Session> session_;
  std::vector<Observation> observations_;
  std::string unreachable_;
  std::size_t sent_on_connection_ = 0;
  bool dead_ = false;
};

struct Detection {
  bool matched = false;
  std::string detail;
};

std::vector<const client::Reply*> replies_of(const std::vector<Observation>& observations) {
  std::vector<const client::Reply*> out;
  for (const auto& o : observations) {
    for (const auto& e : o.events) {
      if (const auto* r = std::get_if<client::Reply>(&e); r && r->report.frame) out.push_back(r);
    }
  }
  return out;
}

std::optional<std::size_t> canary_step(const std::vector<Observation>& observations, std::string_view canary) {
  for (const auto& o : observations) {
    for (const auto& e : o.events) {
      const auto* r = std::get_if<client::Reply>(&e);
      if (r && r->report.frame && contains_canary_fragment(r->report.frame->payload, canary)) return o.step;
    }
  }
  return std::nullopt;
}

Detection detect(const VulnSignature& signature, const std::vector<Observation>& observations, const Target& target,
                 std::optional<std::uint64_t> crash_delta) {
  return std::visit(
      overloaded{
          [&](const sig::CanaryInReply&) -> Detection {
            if (auto step = canary_step(observations, target.canary)) {
              return {true, "canary fragment in reply at step " + std::to_string(*step)};
            }
            return {};
          },
          [&](const sig::SimulatedCrash&) -> Detection {
            for (const auto& o : observations) {
              if (!std::holds_alternative<client::Closed>(o.events.front())) continue;
              if (crash_delta && *crash_delta == 0) return {};
              std::string detail = "connection dropped at step " + std::to_string(o.step);
              if (crash_delta) detail += ", crash counter +" + std::to_string(*crash_delta);
              return {true, detail};
            }
            return {};
          },
          [&](const sig::IllegalAccept& s) -> Detection {
            for (const auto& o : observations) {
              const auto* e = std::get_if<expect::Err>(&o.expected);
              if (e == nullptr || e->code != s.expected_err_code) continue;
              const auto* r = std::get_if<client::Reply>(&o.events.front());
              if (r && r->report.well_formed() && !r->is_err()) {
                return {true, "step " + std::to_string(o.step) + " accepted where " +
                                  err_code_name(static_cast<std::uint8_t>(s.expected_err_code)) +
                                  " was required: " + r->describe()};
              }
            }
            return {};
          },
          [&](const sig::SmearReply& s) -> Detection {
            for (const auto* r : replies_of(observations)) {
              if (!r->is_ok()) continue;
              auto n = reported_id_length(to_string(r->report.frame->payload));
              if (n && *n != s.honest_id_length) {
                return {true, "server parsed a " + std::to_string(*n) + " byte client id, " +
                                  std::to_string(s.honest_id_length) + " were sent"};
              }
            }
            return {};
          },
          [&](const sig::StaleResidue& s) -> Detection {
            for (const auto* r : replies_of(observations)) {
              const auto text = to_string(r->report.frame->payload);
              if (!s.marker.empty() && text.find(s.marker) != std::string::npos) {
                return {true, "reply carries residue of an earlier transfer: " + r->describe()};
              }
            }
            return {};
          },
      },
      signature);
}

Verdict judge(const AttackCase& attack, const std::vector<Observation>& observations, const Target& target,
              std::optional<std::uint64_t> crash_delta) {
  auto detection = detect(attack.signature, observations, target, crash_delta);
  if (detection.matched) return {VerdictKind::VulnerableConfirmed, signature_name(attack.signature) + ": " + detection.detail};

  const bool crash_sig = std::holds_alternative<sig::SimulatedCrash>(attack.signature);
  if (crash_delta && *crash_delta > 0) {
    return {VerdictKind::Inconclusive, "crash counter moved by " + std::to_string(*crash_delta) + " without a matching signature"};
  }
  if (!std::holds_alternative<sig::CanaryInReply>(attack.signature)) {
    if (auto step = canary_step(observations, target.canary)) {
      return {VerdictKind::Inconclusive, "canary fragment at step " + std::to_string(*step) + " outside the case signature"};
    }
  }
  for (const auto& o : observations) {
    if (o.met) continue;
    std::string reason = mismatch_text(o);
    if (crash_sig && std::holds_alternative<client::Closed>(o.events.front())) {
      reason += " (connection dropped but the crash counter did not move)";
    }
    return {VerdictKind::Inconclusive, reason};
  }
  return {VerdictKind::Secure, std::to_string(observations.size()) + "/" + std::to_string(observations.size()) + " expected replies received"};
}

std::string make_temp_dir(const std::string& name) {
  std::string pattern = (std::filesystem::temp_directory_path() / ("cft-" + name + "-XXXXXX")).string();
  if (::mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("cannot create a temporary directory");
  return pattern;
}

}  // namespace

std::string_view verdict_name(VerdictKind kind) {
  switch (kind) {
    case VerdictKind::VulnerableConfirmed: return "VULNERABLE_CONFIRMED";
    case VerdictKind::Secure: return "SECURE";
    case VerdictKind::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

std::string_view evidence_kind_name(Evidence::Kind kind) {
  switch (kind) {
    case Evidence::Kind::Sent: return "sent";
    case Evidence::Kind::Event: return "event";
    case Evidence::Kind::Note: return "note";
  }
  return "?";
}

bool contains_canary_fragment(ByteView bytes, std::string_view canary) {
  if (canary.empty()) return false;
  const std::size_t width = std::min<std::size_t>(8, canary.size());
  const std::string cyclic = std::string(canary) + std::string(canary);
  for (std::size_t i = 0; i < canary.size(); ++i) {
    const std::string_view window(cyclic.data() + i, width);
    if (std::search(bytes.begin(), bytes.end(), window.begin(), window.end()) != bytes.end()) return true;
  }
  return false;
}

std::optional<std::size_t> reported_id_length(std::string_view ok_message) {
  constexpr std::string_view key = "client id ";
  const auto at = ok_message.find(key);
  if (at == std::string_view::npos) return std::nullopt;
  const char* first = ok_message.data() + at + key.size();
  const char* last = ok_message.data() + ok_message.size();
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr == first) return std::nullopt;
  if (std::string_view(ptr, static_cast<std::size_t>(last - ptr)).rfind(" bytes", 0) != 0) return std::nullopt;
  return value;
}

CaseResult run_case(const AttackCase& attack, const Target& target, const RunOptions& options) {
  CaseResult result;
  const auto started = Clock::now();
  if (attack.unavailable) {
    result.verdict = {VerdictKind::Inconclusive, *attack.unavailable};
    return result;
  }

  const auto before = target.crash_probe ? target.crash_probe() : std::nullopt;
  CaseRun run(target, options, result);
  const bool completed = run.execute(attack.script);
  const auto after = target.crash_probe ? target.crash_probe() : std::nullopt;
  if (before && after) result.crash_delta = *after - *before;

  for (const auto* r : replies_of(run.observations())) {
    if (r->is_err()) ++result.err_replies;
  }
  if (!completed) {
    result.verdict = {VerdictKind::Inconclusive, run.unreachable()};
  } else {
    result.verdict = judge(attack, run.observations(), target, result.crash_delta);
  }
  result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
  return result;
}

bool SuiteReport::passed() const {
  return std::all_of(outcomes.begin(), outcomes.end(), [](const CaseOutcome& o) { return o.passed(); });
}

std::size_t SuiteReport::confirmations() const {
  return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](const CaseOutcome& o) {
    return o.passed() && o.expected == VerdictKind::VulnerableConfirmed;
  }));
}

std::size_t SuiteReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const CaseOutcome& o) { return !o.passed(); }));
}

std::size_t SuiteReport::failures_on(std::string_view target) const {
  return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [&](const CaseOutcome& o) {
    return o.target == target && !o.passed();
  }));
}

const CaseOutcome* SuiteReport::find(std::string_view case_id, std::string_view target) const {
  for (const auto& o : outcomes) {
    if (o.case_id == case_id && o.target == target) return &o;
  }
  return nullptr;
}

VerdictKind expected_verdict(const AttackCase& attack, const server::FlawSet& flaws) {
  return attack.targets_flaw && flaws.has(*attack.targets_flaw) ? VerdictKind::VulnerableConfirmed : VerdictKind::Secure;
}

SuiteReport run_suite(const std::vector<Target>& targets, const SuiteOptions& options) {
  SuiteReport report;
  const auto started = Clock::now();
  std::mutex progress_mutex;

  for (const auto& target : targets) {
    auto cases = builtin_cases(target.context);
    if (options.filter) std::erase_if(cases, [&](const AttackCase& c) { return !options.filter(c); });

    std::vector<CaseOutcome> outcomes(cases.size());
    auto run_one = [&](std::size_t i) {
      const auto& c = cases[i];
      auto& o = outcomes[i];
      o.case_id = c.id;
      o.category = c.category;
      o.targets_flaw = c.targets_flaw;
      o.target = target.name;
      o.expected = expected_verdict(c, target.expected_flaws);
      o.result = run_case(c, target, options.run);
      if (options.progress) {
        std::lock_guard lock(progress_mutex);
        options.progress(o);
      }
    };

    std::vector<std::size_t> serial;
    if (options.jobs > 1) {
      std::vector<std::size_t> parallel;
      for (std::size_t i = 0; i < cases.size(); ++i) (needs_serial_run(cases[i]) ? serial : parallel).push_back(i);
      std::atomic<std::size_t> next{0};
      {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < std::min(options.jobs, parallel.size()); ++w) {
          workers.emplace_back([&] {
            for (auto k = next++; k < parallel.size(); k = next++) run_one(parallel[k]);
          });
        }
      }
    } else {
      for (std::size_t i = 0; i < cases.size(); ++i) serial.push_back(i);
    }
    for (auto i : serial) run_one(i);

    std::move(outcomes.begin(), outcomes.end(), std::back_inserter(report.outcomes));
  }
  report.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
  return report;
}

HostedServer::HostedServer(std::string name, server::FlawSet flaws, const HostedOptions& options)
    : name_(std::move(name)), base_(make_temp_dir(name_)), root_(base_ / "root") {
  std::filesystem::create_directories(root_);
  server::ServerConfig config;
  config.listen = {"127.0.0.1", 0};
  config.sandbox_root = root_;
  config.flaws = flaws;
  config.canary_secret = options.canary;
  config.max_file_size = options.max_file_size;
  config.read_timeout = options.read_timeout;
  try {
    server_ = server::Server::start(std::move(config));
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(base_, ec);
    throw;
  }
}

HostedServer::~HostedServer() {
  server_->shutdown();
  std::error_code ec;
  std::filesystem::remove_all(base_, ec);
}

Target HostedServer::target() const {
  Target t;
  t.name = name_;
  t.endpoint = server_->endpoint();
  t.expected_flaws = server_->config().flaws;
  t.canary = server_->config().canary_secret;
  auto* srv = server_.get();
  t.crash_probe = [srv]() -> std::optional<std::uint64_t> { return srv->crash_count(); };
  t.read_timeout = server_->config().read_timeout;
  t.context.sandbox_root = root_;
  t.context.max_file_size = server_->config().max_file_size;
  return t;
}

}  // namespace cft::harness
