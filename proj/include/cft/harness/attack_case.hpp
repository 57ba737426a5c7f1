#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cft/client/raw_frame.hpp"
#include "cft/server/flaws.hpp"

namespace cft::harness {

enum class Category {
  BVA,
  MissingValues,
  ExtremeNumerics,
  LongStrings,
  MalformedSequence,
  DirectoryAttack,
  ConfirmatoryPut,
};

inline constexpr std::size_t kCategoryCount = 7;

std::string_view category_name(Category category);

namespace sig {

/// Some reply carries a fragment of the canary.
struct CanaryInReply {};
/// The connection dropped on an expected reply and the server counted a crash.
struct SimulatedCrash {};
/// The server accepted a frame the hardened rules refuse with `expected_err_code`.
struct IllegalAccept {
  ErrCode expected_err_code = ErrCode::BadSequence;
};
/// A HELLO reply reports a client id length other than the one honestly sent.
struct SmearReply {
  std::size_t honest_id_length = 0;
};
/// Bytes from an earlier session's transfer show up in a reply.
struct StaleResidue {
  std::string marker;
};

}  // namespace sig

using VulnSignature =
    std::variant<sig::CanaryInReply, sig::SimulatedCrash, sig::IllegalAccept, sig::SmearReply, sig::StaleResidue>;

std::string signature_name(const VulnSignature& signature);

/// The flaw effect a signature observes.
server::FlawEffect signature_effect(const VulnSignature& signature);

namespace expect {

struct Ok {};
struct Err {
  ErrCode code = ErrCode::Malformed;
};
/// FILE_INFO followed by DATA frames carrying exactly `content`.
struct File {
  Bytes content;
};

}  // namespace expect

using Expectation = std::variant<expect::Ok, expect::Err, expect::File>;

std::string describe(const Expectation& expectation);

namespace step {

struct SendFrame {
  client::RawFrameSpec spec;
};
/// Reads one reply. A FILE_INFO reply is followed by reading the DATA frames it announces.
struct Expect {
  Expectation what;
};
/// HELLO (when the session is not greeted yet), PUT_REQ, DATA blocks and PUT_COMMIT,
/// each expected to get Ok.
struct HonestPut {
  std::string filename;
  Bytes content;
  std::uint16_t block_size = 0;
};
/// Drops the connection and opens a fresh one.
struct Reconnect {};

}  // namespace step

using Step = std::variant<step::SendFrame, step::Expect, step::HonestPut, step::Reconnect>;

std::string describe(const Step& step);

struct AttackCase {
  std::string id;
  Category category = Category::BVA;
  std::string description;
  std::vector<Step> script;
  VulnSignature signature;
  std::optional<server::Flaw> targets_flaw;
  /// Set when the case cannot be built for the target, e.g. it needs the sandbox root.
  std::optional<std::string> unavailable;
};

/// True when the case's signature is one the targeted flaw can produce.
bool signature_matches_flaw(const AttackCase& attack);

/// Cases that read the crash counter or the stale buffer pool, or that target a flaw
/// whose effects spill into shared server state. These never run concurrently.
bool needs_serial_run(const AttackCase& attack);

}  // namespace cft::harness
