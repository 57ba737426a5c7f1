#include "cft/client/raw_frame.hpp"

namespace cft::client {

Bytes RawFrameSpec::resolve() const {
  Bytes out;
  out.reserve(kFrameOverhead + payload.size() + trailing_garbage.size());
  out.insert(out.end(), magic.begin(), magic.end());
  out.push_back(version);
  out.push_back(opcode);
  put_u32(out, declared_length.value_or(static_cast<std::uint32_t>(payload.size())));
  out.insert(out.end(), payload.begin(), payload.end());
  out.push_back(checksum.value_or(cft::checksum(payload)));
  out.insert(out.end(), trailing_garbage.begin(), trailing_garbage.end());
  return out;
}

RawFrameSpec RawFrameSpec::honest(std::uint8_t opcode, Bytes payload) {
  RawFrameSpec spec;
  spec.opcode = opcode;
  spec.payload = std::move(payload);
  return spec;
}

RawFrameSpec RawFrameSpec::honest(const OpPayload& payload) {
  return honest(static_cast<std::uint8_t>(opcode_of(payload)), encode_payload(payload));
}

}  // namespace cft::client
