#include "cft/payload.hpp"

#include <cstdio>
#include <sstream>

namespace cft {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void put_text(Bytes& out, std::string_view text) { out.insert(out.end(), text.begin(), text.end()); }

void put_prefixed(Bytes& out, std::string_view text) {
  put_u16(out, static_cast<std::uint16_t>(text.size()));
  put_text(out, text);
}

// Cursor over a payload body that records the first field that ran short.
class BodyReader {
 public:
  explicit BodyReader(ByteView body) : body_(body) {}

  bool need(std::size_t n, std::string_view field) {
    if (pos_ + n <= body_.size()) return true;
    fail(field, "needs " + std::to_string(n) + " bytes, " + std::to_string(body_.size() - pos_) + " present");
    return false;
  }

  std::optional<std::uint8_t> u8(std::string_view field) {
    if (!need(1, field)) return std::nullopt;
    return body_[pos_++];
  }
  std::optional<std::uint16_t> u16(std::string_view field) {
    if (!need(2, field)) return std::nullopt;
    auto v = get_u16(body_, pos_);
    pos_ += 2;
    return v;
  }
  std::optional<std::uint32_t> u32(std::string_view field) {
    if (!need(4, field)) return std::nullopt;
    auto v = get_u32(body_, pos_);
    pos_ += 4;
    return v;
  }
  std::optional<std::string> prefixed_text(std::string_view field) {
    auto len = u16(field);
    if (!len) return std::nullopt;
    if (!need(*len, field)) return std::nullopt;
    auto bytes = body_.subspan(pos_, *len);
    pos_ += *len;
    if (!is_valid_utf8(bytes)) {
      fail(field, "invalid UTF-8");
      return std::nullopt;
    }
    return to_string(bytes);
  }
  ByteView rest() {
    auto r = body_.subspan(pos_);
    pos_ = body_.size();
    return r;
  }
  bool finish() {
    if (pos_ == body_.size()) return true;
    fail("trailing", std::to_string(body_.size() - pos_) + " unexpected bytes after last field");
    return false;
  }
  void fail(std::string_view field, std::string detail) {
    if (!error_) error_ = PayloadMalformed{std::string(field), std::move(detail)};
  }
  PayloadMalformed error() const { return error_.value_or(PayloadMalformed{"?", "malformed"}); }

 private:
  ByteView body_;
  std::size_t pos_ = 0;
  std::optional<PayloadMalformed> error_;
};

std::string quoted(std::string_view text, std::size_t limit = 48) {
  std::string out = "\"";
  for (std::size_t i = 0; i < text.size() && i < limit; ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c >= 0x20 && c < 0x7F && c != '"' && c != '\\') {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\x%02x", c);
      out += buf;
    }
  }
  out += "\"";
  if (text.size() > limit) out += "...(" + std::to_string(text.size()) + " bytes)";
  return out;
}

}  // namespace

Opcode opcode_of(const OpPayload& payload) {
  return std::visit(overloaded{
                        [](const msg::Hello&) { return Opcode::Hello; },
                        [](const msg::Ok&) { return Opcode::Ok; },
                        [](const msg::Err&) { return Opcode::Err; },
                        [](const msg::PutReq&) { return Opcode::PutReq; },
                        [](const msg::Data&) { return Opcode::Data; },
                        [](const msg::PutCommit&) { return Opcode::PutCommit; },
                        [](const msg::GetReq&) { return Opcode::GetReq; },
                        [](const msg::FileInfo&) { return Opcode::FileInfo; },
                        [](const msg::Bye&) { return Opcode::Bye; },
                    },
                    payload);
}

Bytes encode_payload(const OpPayload& payload) {
  Bytes out;
  std::visit(overloaded{
                 [&](const msg::Hello& m) { put_text(out, m.client_id); },
                 [&](const msg::Ok& m) { put_text(out, m.message); },
                 [&](const msg::Err& m) {
                   out.push_back(m.code);
                   put_text(out, m.message);
                 },
                 [&](const msg::PutReq& m) {
                   put_prefixed(out, m.filename);
                   put_u32(out, m.file_size);
                   put_u16(out, m.block_size);
                 },
                 [&](const msg::Data& m) {
                   put_u32(out, m.block_index);
                   out.insert(out.end(), m.data.begin(), m.data.end());
                 },
                 [](const msg::PutCommit&) {},
                 [&](const msg::GetReq& m) { put_prefixed(out, m.filename); },
                 [&](const msg::FileInfo& m) { put_u32(out, m.file_size); },
                 [](const msg::Bye&) {},
             },
             payload);
  return out;
}

Bytes encode_message(const OpPayload& payload) { return encode_frame(opcode_of(payload), encode_payload(payload)); }

PayloadResult decode_payload(std::uint8_t opcode, ByteView body) {
  BodyReader in(body);
  if (!is_known_opcode(opcode)) return PayloadMalformed{"opcode", opcode_name(opcode)};

  switch (static_cast<Opcode>(opcode)) {
    case Opcode::Hello: {
      auto rest = in.rest();
      if (!is_valid_utf8(rest)) return PayloadMalformed{"client_id", "invalid UTF-8"};
      return OpPayload{msg::Hello{to_string(rest)}};
    }
    case Opcode::Ok:
      return OpPayload{msg::Ok{to_string(in.rest())}};
    case Opcode::Err: {
      auto code = in.u8("code");
      if (!code) return in.error();
      return OpPayload{msg::Err{*code, to_string(in.rest())}};
    }
    case Opcode::PutReq: {
      auto name = in.prefixed_text("filename");
      if (!name) return in.error();
      auto size = in.u32("file_size");
      if (!size) return in.error();
      auto block = in.u16("block_size");
      if (!block || !in.finish()) return in.error();
      return OpPayload{msg::PutReq{std::move(*name), *size, *block}};
    }
    case Opcode::Data: {
      auto index = in.u32("block_index");
      if (!index) return in.error();
      auto rest = in.rest();
      return OpPayload{msg::Data{*index, Bytes(rest.begin(), rest.end())}};
    }
    case Opcode::PutCommit:
      if (!in.finish()) return in.error();
      return OpPayload{msg::PutCommit{}};
    case Opcode::GetReq: {
      auto name = in.prefixed_text("filename");
      if (!name || !in.finish()) return in.error();
      return OpPayload{msg::GetReq{std::move(*name)}};
    }
    case Opcode::FileInfo: {
      auto size = in.u32("file_size");
      if (!size || !in.finish()) return in.error();
      return OpPayload{msg::FileInfo{*size}};
    }
    case Opcode::Bye:
      if (!in.finish()) return in.error();
      return OpPayload{msg::Bye{}};
  }
  return PayloadMalformed{"opcode", opcode_name(opcode)};
}

std::string summarize(const OpPayload& payload) {
  std::ostringstream out;
  out << opcode_name(static_cast<std::uint8_t>(opcode_of(payload)));
  std::visit(overloaded{
                 [&](const msg::Hello& m) { out << " client_id=" << quoted(m.client_id); },
                 [&](const msg::Ok& m) { out << " message=" << quoted(m.message, 160); },
                 [&](const msg::Err& m) { out << " code=" << err_code_name(m.code) << " message=" << quoted(m.message); },
                 [&](const msg::PutReq& m) {
                   out << " filename=" << quoted(m.filename) << " file_size=" << m.file_size
                       << " block_size=" << m.block_size;
                 },
                 [&](const msg::Data& m) {
                   out << " block_index=" << m.block_index << " data=" << m.data.size() << " bytes ["
                       << hex_dump(m.data, 16) << "]";
                 },
                 [](const msg::PutCommit&) {},
                 [&](const msg::GetReq& m) { out << " filename=" << quoted(m.filename); },
                 [&](const msg::FileInfo& m) { out << " file_size=" << m.file_size; },
                 [](const msg::Bye&) {},
             },
             payload);
  return out.str();
}

}  // namespace cft
