#include "cft/harness/cases.hpp"

#include <algorithm>

#include "cft/harness/bva.hpp"

namespace cft::harness {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using client::RawFrameSpec;
using server::Flaw;

constexpr std::uint64_t kNegativeThreshold = 0x80000000ull;
constexpr std::size_t kLongString = 60000;

step::SendFrame send(const OpPayload& payload) { return {RawFrameSpec::honest(payload)}; }
step::SendFrame send(RawFrameSpec spec) { return {std::move(spec)}; }
step::Expect expect_ok() { return {expect::Ok{}}; }
step::Expect expect_err(ErrCode code) { return {expect::Err{code}}; }

void greet(std::vector<Step>& script, std::string id = "cft-suite") {
  script.emplace_back(send(msg::Hello{std::move(id)}));
  script.emplace_back(expect_ok());
}

std::string lower(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  return text;
}

Bytes pattern(std::size_t size) {
  Bytes out(size);
  for (std::size_t i = 0; i < size; ++i) out[i] = static_cast<std::uint8_t>('a' + i % 26);
  return out;
}

Bytes repeated(std::string_view text, std::size_t times) {
  Bytes out;
  for (std::size_t i = 0; i < times; ++i) out.insert(out.end(), text.begin(), text.end());
  return out;
}

AttackCase make(std::string id, Category category, std::string description, VulnSignature signature,
                std::optional<Flaw> flaw) {
  AttackCase c;
  c.id = std::move(id);
  c.category = category;
  c.description = std::move(description);
  c.signature = std::move(signature);
  c.targets_flaw = flaw;
  return c;
}

void add_confirmatory(std::vector<AttackCase>& out) {
  auto put = make("C-PUT-OK", Category::ConfirmatoryPut, "correctly formatted PUT of 10 bytes, read back with GET",
                  sig::CanaryInReply{}, std::nullopt);
  const Bytes content = to_bytes("0123456789");
  put.script.emplace_back(step::HonestPut{"c-put-ok.txt", content, 4});
  put.script.emplace_back(send(msg::GetReq{"c-put-ok.txt"}));
  put.script.emplace_back(step::Expect{expect::File{content}});
  put.script.emplace_back(send(msg::Bye{}));
  put.script.emplace_back(expect_ok());
  out.push_back(std::move(put));

  auto bulk = make("C-BULK", Category::ConfirmatoryPut, "PUT of 5001 one-byte DATA frames", sig::CanaryInReply{},
                   std::nullopt);
  bulk.script.emplace_back(step::HonestPut{"c-bulk.bin", pattern(5001), 1});
  out.push_back(std::move(bulk));
}

void add_directory(std::vector<AttackCase>& out, const CaseContext& context) {
  auto get_case = [&](std::string id, std::string description, std::string filename) {
    auto c = make(std::move(id), Category::DirectoryAttack, std::move(description), sig::CanaryInReply{},
                  Flaw::F1PathTraversal);
    greet(c.script);
    c.script.emplace_back(send(msg::GetReq{std::move(filename)}));
    c.script.emplace_back(expect_err(ErrCode::PathDenied));
    return c;
  };

  out.push_back(get_case("C-DIR-1", "GET of ../secret.txt", "../secret.txt"));

  if (context.sandbox_root) {
    const auto secret = std::filesystem::weakly_canonical(*context.sandbox_root).parent_path() / "secret.txt";
    out.push_back(get_case("C-DIR-2", "GET of the secret file by absolute path", secret.string()));
  } else {
    auto c = get_case("C-DIR-2", "GET of the secret file by absolute path", "/secret.txt");
    c.unavailable = "needs the server's sandbox root to build the absolute path";
    out.push_back(std::move(c));
  }

  out.push_back(get_case("C-DIR-3", "GET of a/../../secret.txt", "a/../../secret.txt"));

  auto put = make("C-DIR-4", Category::DirectoryAttack, "PUT_REQ for ../cft-escape.txt",
                  sig::IllegalAccept{ErrCode::PathDenied}, Flaw::F1PathTraversal);
  greet(put.script);
  put.script.emplace_back(send(msg::PutReq{"../cft-escape.txt", 4, 4}));
  put.script.emplace_back(expect_err(ErrCode::PathDenied));
  out.push_back(std::move(put));
}

void add_overruns(std::vector<AttackCase>& out) {
  struct Size {
    const char* id;
    std::size_t extra;
    VulnSignature signature;
  };
  const Size sizes[] = {
      {"C-OVR-S", 16, sig::CanaryInReply{}},
      {"C-OVR-M", 128, sig::CanaryInReply{}},
      {"C-OVR-L", 300, sig::SimulatedCrash{}},
  };
  for (const auto& size : sizes) {
    auto c = make(size.id, Category::BVA, "DATA block " + std::to_string(size.extra) + " bytes over block_size 4",
                  size.signature, Flaw::F2OverrunLeak);
    greet(c.script);
    c.script.emplace_back(send(msg::PutReq{lower(size.id) + ".bin", 64, 4}));
    c.script.emplace_back(expect_ok());
    c.script.emplace_back(send(msg::Data{0, Bytes(4 + size.extra, 'A')}));
    c.script.emplace_back(expect_err(ErrCode::FrameTooLarge));
    out.push_back(std::move(c));
  }
}

void add_length_mismatch(std::vector<AttackCase>& out) {
  auto up = make("C-LEN-UP", Category::BVA, "HELLO declaring 10 payload bytes but carrying 5, then an honest HELLO",
                 sig::SmearReply{5}, Flaw::F3LengthSmearing);
  up.script.emplace_back(send(RawFrameSpec::honest(msg::Hello{"lenup"}).with_declared_length(10)));
  up.script.emplace_back(expect_err(ErrCode::Malformed));
  up.script.emplace_back(send(msg::Hello{"hello"}));
  up.script.emplace_back(expect_ok());
  out.push_back(std::move(up));

  auto down = make("C-LEN-DOWN", Category::BVA, "HELLO declaring 2 payload bytes but carrying 7", sig::SmearReply{7},
                   Flaw::F3LengthSmearing);
  down.script.emplace_back(send(RawFrameSpec::honest(msg::Hello{"lendown"}).with_declared_length(2)));
  down.script.emplace_back(expect_err(ErrCode::Malformed));
  out.push_back(std::move(down));
}

void add_numerics(std::vector<AttackCase>& out, const CaseContext& context) {
  for (auto v : bva_values({16, 1, 65535, 512})) {
    const auto bs = static_cast<std::uint16_t>(v);
    const auto id = "C-NUM-BS-" + std::to_string(v);
    const auto name = lower(id) + ".bin";
    if (bs == 0) {
      auto c = make(id, Category::ExtremeNumerics, "PUT_REQ with block_size 0", sig::SimulatedCrash{},
                    Flaw::F4SignedConfusion);
      greet(c.script);
      c.script.emplace_back(send(msg::PutReq{name, 10, 0}));
      c.script.emplace_back(expect_err(ErrCode::InvalidValue));
      out.push_back(std::move(c));
      continue;
    }
    auto c = make(id, Category::BVA, "PUT of 10 bytes with block_size " + std::to_string(v), sig::CanaryInReply{},
                  std::nullopt);
    c.script.emplace_back(step::HonestPut{name, pattern(10), bs});
    out.push_back(std::move(c));
  }

  auto file_size_case = [&](std::string id, std::uint64_t v) {
    const bool legal = v <= context.max_file_size;
    const bool negative = v >= kNegativeThreshold;
    const bool targets = negative && !legal;
    auto c = make(id, targets ? Category::ExtremeNumerics : Category::BVA,
                  "PUT_REQ with file_size " + std::to_string(v),
                  targets ? VulnSignature{sig::IllegalAccept{ErrCode::FrameTooLarge}} : VulnSignature{sig::CanaryInReply{}},
                  targets ? std::optional{Flaw::F4SignedConfusion} : std::nullopt);
    greet(c.script);
    c.script.emplace_back(send(msg::PutReq{lower(id) + ".bin", static_cast<std::uint32_t>(v), 512}));
    if (legal) c.script.emplace_back(expect_ok());
    else c.script.emplace_back(expect_err(ErrCode::FrameTooLarge));
    return c;
  };

  const auto max32 = std::min<std::uint64_t>(context.max_file_size, 0xFFFFFFFFull);
  for (auto v : bva_values({32, 0, max32, std::min<std::uint64_t>(10, max32)})) {
    out.push_back(file_size_case("C-NUM-FS-" + std::to_string(v), v));
  }
  out.push_back(file_size_case("C-NUM-FS-NEG", 0xFFFFFFFEull));

  auto len = make("C-NUM-LEN-NEG", Category::ExtremeNumerics, "frame header declaring 0x80000000 payload bytes",
                  sig::SimulatedCrash{}, Flaw::F4SignedConfusion);
  greet(len.script);
  len.script.emplace_back(
      send(RawFrameSpec::honest(static_cast<std::uint8_t>(Opcode::Data), Bytes{0, 0, 0, 0}).with_declared_length(0x80000000u)));
  len.script.emplace_back(expect_err(ErrCode::FrameTooLarge));
  out.push_back(std::move(len));
}

void add_sequences(std::vector<AttackCase>& out) {
  auto before_hello = make("C-SEQ-DATA-BEFORE-HELLO", Category::MalformedSequence, "DATA as the first frame",
                           sig::IllegalAccept{ErrCode::BadSequence}, Flaw::F5SequenceLax);
  before_hello.script.emplace_back(send(msg::Data{0, to_bytes("x")}));
  before_hello.script.emplace_back(expect_err(ErrCode::BadSequence));
  out.push_back(std::move(before_hello));

  auto stale = make("C-SEQ-DATA-BEFORE-PUTREQ", Category::MalformedSequence,
                    "honest PUT, then a new session sends DATA without PUT_REQ",
                    sig::StaleResidue{std::string(kStaleMarker)}, Flaw::F5SequenceLax);
  stale.script.emplace_back(step::HonestPut{"c-seq-stale.txt", repeated(kStaleMarker, 6), 16});
  stale.script.emplace_back(step::Reconnect{});
  greet(stale.script, "cft-suite-2");
  stale.script.emplace_back(send(msg::Data{0, to_bytes("x")}));
  stale.script.emplace_back(expect_err(ErrCode::BadSequence));
  out.push_back(std::move(stale));

  auto commit = make("C-SEQ-DOUBLE-COMMIT", Category::MalformedSequence, "second PUT_COMMIT after a finished PUT",
                     sig::IllegalAccept{ErrCode::BadSequence}, Flaw::F5SequenceLax);
  commit.script.emplace_back(step::HonestPut{"c-seq-commit.txt", pattern(8), 4});
  commit.script.emplace_back(send(msg::PutCommit{}));
  commit.script.emplace_back(expect_err(ErrCode::BadSequence));
  out.push_back(std::move(commit));

  auto nested = make("C-SEQ-PUTREQ-IN-TRANSFER", Category::MalformedSequence, "PUT_REQ while a transfer is open",
                     sig::IllegalAccept{ErrCode::BadSequence}, Flaw::F5SequenceLax);
  greet(nested.script);
  nested.script.emplace_back(send(msg::PutReq{"c-seq-a.txt", 8, 4}));
  nested.script.emplace_back(expect_ok());
  nested.script.emplace_back(send(msg::PutReq{"c-seq-b.txt", 8, 4}));
  nested.script.emplace_back(expect_err(ErrCode::BadSequence));
  out.push_back(std::move(nested));
}

void add_unknown_opcodes(std::vector<AttackCase>& out) {
  auto c = make("C-OPC-UNKNOWN", Category::MalformedSequence, "every undefined opcode after HELLO", sig::CanaryInReply{},
                Flaw::F6DebugDisclosure);
  greet(c.script);
  for (unsigned op = 0; op < 256; ++op) {
    if (is_known_opcode(static_cast<std::uint8_t>(op))) continue;
    c.script.emplace_back(send(RawFrameSpec::honest(static_cast<std::uint8_t>(op), {})));
    c.script.emplace_back(expect_err(ErrCode::UnknownOp));
  }
  out.push_back(std::move(c));
}

void add_missing_and_long(std::vector<AttackCase>& out) {
  auto putreq = make("C-MISSING-PUTREQ-SIZE", Category::MissingValues, "PUT_REQ ending after the filename",
                     sig::CanaryInReply{}, std::nullopt);
  greet(putreq.script);
  Bytes body;
  put_u16(body, 13);
  const auto name = to_bytes("c-missing.txt");
  body.insert(body.end(), name.begin(), name.end());
  putreq.script.emplace_back(send(RawFrameSpec::honest(static_cast<std::uint8_t>(Opcode::PutReq), body)));
  putreq.script.emplace_back(expect_err(ErrCode::Malformed));
  out.push_back(std::move(putreq));

  auto data = make("C-MISSING-DATA-EMPTY", Category::MissingValues, "DATA with an empty payload", sig::CanaryInReply{},
                   std::nullopt);
  greet(data.script);
  data.script.emplace_back(send(msg::PutReq{"c-missing-data.bin", 8, 4}));
  data.script.emplace_back(expect_ok());
  data.script.emplace_back(send(RawFrameSpec::honest(static_cast<std::uint8_t>(Opcode::Data), {})));
  data.script.emplace_back(expect_err(ErrCode::Malformed));
  out.push_back(std::move(data));

  auto filename = make("C-MISSING-FILENAME", Category::MissingValues, "PUT_REQ with an empty filename",
                       sig::CanaryInReply{}, std::nullopt);
  greet(filename.script);
  filename.script.emplace_back(send(msg::PutReq{"", 8, 4}));
  filename.script.emplace_back(expect_err(ErrCode::InvalidValue));
  out.push_back(std::move(filename));

  auto id = make("C-MISSING-HELLO-ID", Category::MissingValues, "HELLO with an empty client id", sig::CanaryInReply{},
                 std::nullopt);
  id.script.emplace_back(send(msg::Hello{""}));
  id.script.emplace_back(expect_err(ErrCode::InvalidValue));
  out.push_back(std::move(id));

  auto long_name = make("C-LONG-1", Category::LongStrings, "PUT_REQ with a 60000 byte filename", sig::CanaryInReply{},
                        std::nullopt);
  greet(long_name.script);
  long_name.script.emplace_back(send(msg::PutReq{std::string(kLongString, 'A'), 8, 4}));
  long_name.script.emplace_back(expect_err(ErrCode::InvalidValue));
  out.push_back(std::move(long_name));

  auto long_id = make("C-LONG-2", Category::LongStrings, "HELLO with a 60000 byte client id", sig::CanaryInReply{},
                      std::nullopt);
  long_id.script.emplace_back(send(msg::Hello{std::string(kLongString, 'B')}));
  long_id.script.emplace_back(expect_err(ErrCode::InvalidValue));
  out.push_back(std::move(long_id));
}

}  // namespace

std::string_view category_name(Category category) {
  switch (category) {
    case Category::BVA: return "BVA";
    case Category::MissingValues: return "MissingValues";
    case Category::ExtremeNumerics: return "ExtremeNumerics";
    case Category::LongStrings: return "LongStrings";
    case Category::MalformedSequence: return "MalformedSequence";
    case Category::DirectoryAttack: return "DirectoryAttack";
    case Category::ConfirmatoryPut: return "ConfirmatoryPut";
  }
  return "?";
}

std::string signature_name(const VulnSignature& signature) {
  return std::visit(overloaded{
                        [](const sig::CanaryInReply&) { return std::string("CanaryInReply"); },
                        [](const sig::SimulatedCrash&) { return std::string("SimulatedCrash"); },
                        [](const sig::IllegalAccept& s) {
                          return "IllegalAccept{" + err_code_name(static_cast<std::uint8_t>(s.expected_err_code)) + "}";
                        },
                        [](const sig::SmearReply& s) { return "SmearReply{" + std::to_string(s.honest_id_length) + "}"; },
                        [](const sig::StaleResidue& s) { return "StaleResidue{" + s.marker + "}"; },
                    },
                    signature);
}

server::FlawEffect signature_effect(const VulnSignature& signature) {
  using server::FlawEffect;
  return std::visit(overloaded{
                        [](const sig::CanaryInReply&) { return FlawEffect::LeaksCanary; },
                        [](const sig::SimulatedCrash&) { return FlawEffect::CrashesSession; },
                        [](const sig::IllegalAccept&) { return FlawEffect::AcceptsIllegally; },
                        [](const sig::SmearReply&) { return FlawEffect::SmearsFrames; },
                        [](const sig::StaleResidue&) { return FlawEffect::EchoesResidue; },
                    },
                    signature);
}

std::string describe(const Expectation& expectation) {
  return std::visit(overloaded{
                        [](const expect::Ok&) { return std::string("OK"); },
                        [](const expect::Err& e) { return "ERR " + err_code_name(static_cast<std::uint8_t>(e.code)); },
                        [](const expect::File& f) { return "FILE " + std::to_string(f.content.size()) + " bytes"; },
                    },
                    expectation);
}

std::string describe(const Step& s) {
  return std::visit(overloaded{
                        [](const step::SendFrame& f) {
                          const auto bytes = f.spec.resolve();
                          auto report = decode_frame(bytes);
                          std::string text = "send " + opcode_name(f.spec.opcode) + " (" + std::to_string(bytes.size()) +
                                             " bytes";
                          if (!report.well_formed()) text += ", forged";
                          return text + ")";
                        },
                        [](const step::Expect& e) { return "expect " + describe(e.what); },
                        [](const step::HonestPut& p) {
                          return "honest put \"" + p.filename + "\" " + std::to_string(p.content.size()) +
                                 " bytes, block_size " + std::to_string(p.block_size);
                        },
                        [](const step::Reconnect&) { return std::string("reconnect"); },
                    },
                    s);
}

bool signature_matches_flaw(const AttackCase& attack) {
  if (!attack.targets_flaw) return true;
  return server::flaw_can_produce(*attack.targets_flaw, signature_effect(attack.signature));
}

bool needs_serial_run(const AttackCase& attack) {
  if (std::holds_alternative<sig::SimulatedCrash>(attack.signature)) return true;
  if (std::holds_alternative<sig::StaleResidue>(attack.signature)) return true;
  if (!attack.targets_flaw) return false;
  const auto flaw = *attack.targets_flaw;
  return flaw == Flaw::F2OverrunLeak || flaw == Flaw::F4SignedConfusion || flaw == Flaw::F5SequenceLax;
}

std::vector<AttackCase> builtin_cases(const CaseContext& context) {
  std::vector<AttackCase> out;
  add_confirmatory(out);
  add_directory(out, context);
  add_overruns(out);
  add_length_mismatch(out);
  add_numerics(out, context);
  add_sequences(out);
  add_unknown_opcodes(out);
  add_missing_and_long(out);
  return out;
}

std::optional<AttackCase> find_case(std::string_view id, const CaseContext& context) {
  for (auto& c : builtin_cases(context)) {
    if (c.id == id) return std::move(c);
  }
  return std::nullopt;
}

}  // namespace cft::harness
