#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "cft/bytes.hpp"
#include "cft/frame.hpp"

namespace cft {

namespace msg {

struct Hello {
  std::string client_id;  // rest of payload, UTF-8
  bool operator==(const Hello&) const = default;
};
struct Ok {
  std::string message;  // rest of payload, raw bytes
  bool operator==(const Ok&) const = default;
};
struct Err {
  std::uint8_t code = 0;
  std::string message;
  bool operator==(const Err&) const = default;
};
struct PutReq {
  std::string filename;  // u16 length prefix, UTF-8
  std::uint32_t file_size = 0;
  std::uint16_t block_size = 0;
  bool operator==(const PutReq&) const = default;
};
struct Data {
  std::uint32_t block_index = 0;
  Bytes data;
  bool operator==(const Data&) const = default;
};
struct PutCommit {
  bool operator==(const PutCommit&) const = default;
};
struct GetReq {
  std::string filename;
  bool operator==(const GetReq&) const = default;
};
struct FileInfo {
  std::uint32_t file_size = 0;
  bool operator==(const FileInfo&) const = default;
};
struct Bye {
  bool operator==(const Bye&) const = default;
};

}  // namespace msg

using OpPayload =
    std::variant<msg::Hello, msg::Ok, msg::Err, msg::PutReq, msg::Data, msg::PutCommit, msg::GetReq, msg::FileInfo, msg::Bye>;

Opcode opcode_of(const OpPayload& payload);

Bytes encode_payload(const OpPayload& payload);

/// Encodes the payload and wraps it in a well-formed frame.
Bytes encode_message(const OpPayload& payload);

/// A payload body that does not match its opcode's layout.
struct PayloadMalformed {
  std::string field;  // first field that failed: "filename", "file_size", "trailing", ...
  std::string detail;
  bool operator==(const PayloadMalformed&) const = default;
};

using PayloadResult = std::variant<OpPayload, PayloadMalformed>;

PayloadResult decode_payload(std::uint8_t opcode, ByteView body);

inline const OpPayload* payload_value(const PayloadResult& r) { return std::get_if<OpPayload>(&r); }
inline const PayloadMalformed* payload_error(const PayloadResult& r) { return std::get_if<PayloadMalformed>(&r); }

/// One-line human summary, e.g. `PUT_REQ filename="a.txt" file_size=10 block_size=4`.
std::string summarize(const OpPayload& payload);

}  // namespace cft
