#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>

#include <CLI11.hpp>

#include "cft/client/session.hpp"
#include "cft/harness/report.hpp"
#include "cft/harness/runner.hpp"
#include "cft/server/server.hpp"
#include "cft/trace/trace.hpp"

namespace {

using namespace cft;

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

/// Configuration and usage problems; reported on stderr with exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string canary_from_env() {
  const char* value = std::getenv("CFT_CANARY");
  return value != nullptr && *value != '\0' ? std::string(value) : std::string(server::kDefaultCanary);
}

net::Endpoint endpoint_arg(const std::string& text) {
  try {
    return net::parse_endpoint(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::unique_ptr<trace::FileTraceSink> open_trace(const std::string& path) {
  if (path.empty()) return nullptr;
  try {
    return std::make_unique<trace::FileTraceSink>(path);
  } catch (const trace::TraceError& e) {
    throw UsageError(e.what());
  }
}

client::Session connect_greeted(const std::string& target, trace::TraceSink* sink, int timeout_ms) {
  auto session = client::Session::connect(endpoint_arg(target), sink);
  if (timeout_ms > 0) session.set_receive_timeout(Millis{timeout_ms});
  auto event = session.hello("cftbench");
  if (session.phase() != client::ClientPhase::Greeted) {
    throw std::runtime_error("HELLO refused: " + client::describe(event));
  }
  return session;
}

struct ServeArgs {
  std::string config;
  std::string host = "127.0.0.1";
  int port = -1;
  std::string root;
  std::string flaws;
  int timeout_ms = 0;
  std::uint64_t max_file_size = 0;
};

int run_serve(const ServeArgs& args) {
  server::ServerConfig config;
  config.canary_secret = canary_from_env();
  try {
    if (!args.config.empty()) config = server::load_config_file(args.config, config);
    if (!args.host.empty()) config.listen.host = args.host;
    if (args.port >= 0) config.listen.port = static_cast<std::uint16_t>(args.port);
    if (!args.root.empty()) config.sandbox_root = args.root;
    if (!args.flaws.empty()) config.flaws = server::parse_flaws(args.flaws);
    if (args.timeout_ms > 0) config.read_timeout = Millis{args.timeout_ms};
    if (args.max_file_size > 0) config.max_file_size = args.max_file_size;
  } catch (const server::ConfigError& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  std::unique_ptr<server::Server> srv;
  try {
    srv = server::Server::start(config);
  } catch (const server::ConfigError& e) {
    throw UsageError(e.what());
  }
  std::cout << "listening on " << srv->endpoint().to_string() << " root=" << config.sandbox_root.string()
            << " flaws=" << config.flaws.to_string() << std::endl;
  int signal = 0;
  sigwait(&stop_signals, &signal);
  std::cout << "shutting down after " << srv->sessions_accepted() << " sessions, " << srv->crash_count()
            << " simulated crashes" << std::endl;
  srv->shutdown();
  return kExitOk;
}

int run_put(const std::string& target, const std::string& file, const std::string& name, int block_size,
            const std::string& trace_path, int timeout_ms) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UsageError("cannot read " + file);
  Bytes content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (block_size < 1 || block_size > 65535) throw UsageError("--block-size must be 1..65535");

  auto sink = open_trace(trace_path);
  auto session = connect_greeted(target, sink.get(), timeout_ms);
  const auto remote = name.empty() ? std::filesystem::path(file).filename().string() : name;
  auto result = session.put_file(remote, content, static_cast<std::uint16_t>(block_size));
  if (result.ok()) {
    session.bye();
    std::cout << "stored " << remote << ": " << content.size() << " bytes in " << result.data_frames
              << " blocks" << std::endl;
    return kExitOk;
  }
  std::cerr << "put failed: " << (result.replies.empty() ? "no reply" : client::describe(result.replies.back()))
            << std::endl;
  return kExitFail;
}

int run_get(const std::string& target, const std::string& name, const std::string& out_path,
            const std::string& trace_path, int timeout_ms) {
  auto sink = open_trace(trace_path);
  auto session = connect_greeted(target, sink.get(), timeout_ms);
  auto result = session.get_file(name);
  if (!result.ok()) {
    std::cerr << "get failed: " << (result.replies.empty() ? "no reply" : client::describe(result.replies.back()))
              << std::endl;
    return kExitFail;
  }
  session.bye();
  if (out_path.empty() || out_path == "-") {
    std::cout.write(reinterpret_cast<const char*>(result.content.data()),
                    static_cast<std::streamsize>(result.content.size()));
    std::cout.flush();
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(result.content.data()), static_cast<std::streamsize>(result.content.size()));
    if (!out) throw std::runtime_error("cannot write " + out_path);
    std::cerr << "wrote " << result.content.size() << " bytes to " << out_path << std::endl;
  }
  return kExitOk;
}

struct AttackArgs {
  std::string target;
  std::string case_id;
  std::string trace;
  std::string root;
  int timeout_ms = 0;
  std::uint64_t max_file_size = server::kDefaultMaxFileSize;
};

int run_attack(const AttackArgs& args) {
  harness::CaseContext context;
  if (!args.root.empty()) context.sandbox_root = args.root;
  context.max_file_size = args.max_file_size;
  auto attack = harness::find_case(args.case_id, context);
  if (!attack) throw UsageError("unknown case " + args.case_id + " (see list-cases)");

  harness::Target target;
  target.name = args.target;
  target.endpoint = endpoint_arg(args.target);
  target.canary = canary_from_env();
  target.context = context;
  if (args.timeout_ms > 0) target.read_timeout = Millis{args.timeout_ms};

  auto sink = open_trace(args.trace);
  harness::RunOptions options;
  options.trace = sink.get();
  auto result = harness::run_case(*attack, target, options);
  harness::print_case_result(std::cout, *attack, result);
  return result.verdict.kind == harness::VerdictKind::Secure ? kExitOk : kExitFail;
}

struct SuiteArgs {
  bool self_hosted = false;
  std::string flawed;
  std::string hardened;
  std::string flaws = "all";
  std::string report;
  std::string root;
  std::vector<std::string> cases;
  std::size_t jobs = 1;
  int timeout_ms = 0;
  bool quiet = false;
};

int run_suite_command(const SuiteArgs& args) {
  server::FlawSet flawed_set;
  try {
    flawed_set = server::parse_flaws(args.flaws);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  harness::SuiteOptions options;
  options.jobs = std::max<std::size_t>(1, args.jobs);
  if (!args.cases.empty()) {
    options.filter = [&](const harness::AttackCase& c) {
      return std::find(args.cases.begin(), args.cases.end(), c.id) != args.cases.end();
    };
  }
  if (!args.quiet) {
    options.progress = [](const harness::CaseOutcome& o) {
      std::cerr << (o.passed() ? "  ok   " : "  FAIL ") << o.case_id << " vs " << o.target << ": "
                << harness::verdict_name(o.result.verdict.kind) << std::endl;
    };
  }

  std::vector<std::unique_ptr<harness::HostedServer>> hosted;
  std::vector<harness::Target> targets;
  if (args.self_hosted) {
    if (!args.flawed.empty() || !args.hardened.empty()) throw UsageError("--self-hosted excludes --flawed/--hardened");
    harness::HostedOptions hosted_options;
    hosted_options.canary = canary_from_env();
    if (args.timeout_ms > 0) hosted_options.read_timeout = Millis{args.timeout_ms};
    hosted.push_back(std::make_unique<harness::HostedServer>("flawed", flawed_set, hosted_options));
    hosted.push_back(std::make_unique<harness::HostedServer>("hardened", server::FlawSet::hardened(), hosted_options));
    for (const auto& h : hosted) targets.push_back(h->target());
  } else {
    if (args.flawed.empty() || args.hardened.empty()) {
      throw UsageError("suite needs --self-hosted or both --flawed and --hardened");
    }
    auto remote = [&](std::string name, const std::string& address, server::FlawSet flaws) {
      harness::Target t;
      t.name = std::move(name);
      t.endpoint = endpoint_arg(address);
      t.expected_flaws = flaws;
      t.canary = canary_from_env();
      if (args.timeout_ms > 0) t.read_timeout = Millis{args.timeout_ms};
      if (!args.root.empty()) t.context.sandbox_root = args.root;
      return t;
    };
    targets.push_back(remote("flawed", args.flawed, flawed_set));
    targets.push_back(remote("hardened", args.hardened, server::FlawSet::hardened()));
  }

  auto report = harness::run_suite(targets, options);
  hosted.clear();
  harness::print_summary(std::cout, report);
  if (!args.report.empty()) {
    try {
      harness::write_report(args.report, report);
    } catch (const std::runtime_error& e) {
      throw UsageError(e.what());
    }
  }
  return report.passed() ? kExitOk : kExitFail;
}

int run_decode(const std::string& path) {
  trace::LoadedTrace loaded;
  try {
    loaded = trace::load_trace(path);
  } catch (const trace::TraceError& e) {
    throw UsageError(e.what());
  }
  std::cout << trace::render(trace::review(loaded));
  return kExitOk;
}

int run_list_cases(const std::string& root) {
  harness::CaseContext context;
  if (!root.empty()) context.sandbox_root = root;
  for (const auto& c : harness::builtin_cases(context)) {
    std::cout << c.id << '\t' << harness::category_name(c.category) << '\t'
              << (c.targets_flaw ? server::flaw_id(*c.targets_flaw) : std::string("-")) << '\t'
              << harness::signature_name(c.signature) << '\t' << c.description << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cftbench: CFT protocol server, attack client and security suite"};
  app.require_subcommand(1, 1);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "run a server until SIGINT/SIGTERM");
  serve_cmd->add_option("--config", serve.config, "key = value config file");
  serve_cmd->add_option("--host", serve.host, "listen address");
  serve_cmd->add_option("--port", serve.port, "listen port (0 picks one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--root", serve.root, "sandbox root directory");
  serve_cmd->add_option("--flaws", serve.flaws, "all, none, or a list such as F1,F4");
  serve_cmd->add_option("--timeout-ms", serve.timeout_ms, "per-frame read timeout")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--max-file-size", serve.max_file_size, "largest accepted PUT in bytes");

  std::string target, file, name, trace_path, out_path;
  int block_size = 512;
  int timeout_ms = 0;
  auto* put_cmd = app.add_subcommand("put", "upload a file");
  put_cmd->add_option("--target", target, "host:port")->required();
  put_cmd->add_option("file", file, "local file")->required();
  put_cmd->add_option("--name", name, "remote filename (default: local basename)");
  put_cmd->add_option("--block-size", block_size, "DATA block size");
  put_cmd->add_option("--trace", trace_path, "write a wire trace");
  put_cmd->add_option("--timeout-ms", timeout_ms, "reply timeout")->check(CLI::PositiveNumber);

  auto* get_cmd = app.add_subcommand("get", "download a file");
  get_cmd->add_option("--target", target, "host:port")->required();
  get_cmd->add_option("filename", name, "remote filename")->required();
  get_cmd->add_option("--out", out_path, "output file (default stdout)");
  get_cmd->add_option("--trace", trace_path, "write a wire trace");
  get_cmd->add_option("--timeout-ms", timeout_ms, "reply timeout")->check(CLI::PositiveNumber);

  AttackArgs attack;
  auto* attack_cmd = app.add_subcommand("attack", "run one attack case against a server");
  attack_cmd->add_option("--target", attack.target, "host:port")->required();
  attack_cmd->add_option("--case", attack.case_id, "case id, see list-cases")->required();
  attack_cmd->add_option("--trace", attack.trace, "write a wire trace");
  attack_cmd->add_option("--root", attack.root, "server sandbox root, needed by C-DIR-2");
  attack_cmd->add_option("--timeout-ms", attack.timeout_ms, "server read timeout")->check(CLI::PositiveNumber);
  attack_cmd->add_option("--max-file-size", attack.max_file_size, "server file size limit");

  SuiteArgs suite;
  auto* suite_cmd = app.add_subcommand("suite", "run the differential suite");
  auto* self_flag = suite_cmd->add_flag("--self-hosted", suite.self_hosted, "start both servers on loopback");
  suite_cmd->add_option("--flawed", suite.flawed, "host:port of the flawed server")->excludes(self_flag);
  suite_cmd->add_option("--hardened", suite.hardened, "host:port of the hardened server")->excludes(self_flag);
  suite_cmd->add_option("--flaws", suite.flaws, "flaws carried by the flawed server");
  suite_cmd->add_option("--root", suite.root, "flawed server sandbox root, needed by C-DIR-2");
  suite_cmd->add_option("--report", suite.report, "JSON lines report path");
  suite_cmd->add_option("--case", suite.cases, "restrict to these case ids");
  suite_cmd->add_option("--jobs", suite.jobs, "concurrent cases")->check(CLI::Range(1, 64));
  suite_cmd->add_option("--timeout-ms", suite.timeout_ms, "server read timeout")->check(CLI::PositiveNumber);
  suite_cmd->add_flag("--quiet", suite.quiet, "no per-case progress");

  std::string decode_path;
  auto* decode_cmd = app.add_subcommand("decode", "review a trace file");
  decode_cmd->add_option("trace", decode_path, "trace file")->required();

  std::string list_root;
  auto* list_cmd = app.add_subcommand("list-cases", "print every builtin case");
  list_cmd->add_option("--root", list_root, "sandbox root used to build C-DIR-2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*serve_cmd) return run_serve(serve);
    if (*put_cmd) return run_put(target, file, name, block_size, trace_path, timeout_ms);
    if (*get_cmd) return run_get(target, name, out_path, trace_path, timeout_ms);
    if (*attack_cmd) return run_attack(attack);
    if (*suite_cmd) return run_suite_command(suite);
    if (*decode_cmd) return run_decode(decode_path);
    if (*list_cmd) return run_list_cases(list_root);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFail;
  }
  return kExitUsage;
}
