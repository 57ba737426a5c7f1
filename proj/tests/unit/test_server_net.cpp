#include <gtest/gtest.h>

#include <thread>

#include "cft/client/session.hpp"
#include "cft/server/server.hpp"
#include "scratch.hpp"

namespace cft::server {
namespace {

using client::Closed;
using client::Reply;
using client::Session;
using client::Timeout;
using testing::ScratchDir;

struct Hosted {
  explicit Hosted(FlawSet flaws, Millis read_timeout = Millis{2000}) {
    std::filesystem::create_directory(dir.path() / "root");
    ServerConfig config;
    config.sandbox_root = dir.path() / "root";
    config.flaws = flaws;
    config.read_timeout = read_timeout;
    server = Server::start(config);
  }
  std::filesystem::path root() const { return dir.path() / "root"; }

  ScratchDir dir;
  std::unique_ptr<Server> server;
};

const Reply& reply_of(const client::ServerEvent& event) {
  static const Reply empty{};
  const auto* r = std::get_if<Reply>(&event);
  EXPECT_NE(r, nullptr) << client::describe(event);
  return r ? *r : empty;
}

bool wait_for(const std::function<bool()>& pred, Millis limit = Millis{3000}) {
  const auto until = Clock::now() + limit;
  while (Clock::now() < until) {
    if (pred()) return true;
    std::this_thread::sleep_for(Millis{10});
  }
  return pred();
}

TEST(ServerNet, PlantsSecretBesideRoot) {
  Hosted hosted(FlawSet::hardened());
  EXPECT_EQ(testing::read_file(hosted.dir.path() / "secret.txt"), std::string(kDefaultCanary));
  EXPECT_FALSE(std::filesystem::exists(hosted.root() / "secret.txt"));
}

TEST(ServerNet, ByeClosesCleanly) {
  Hosted hosted(FlawSet::hardened());
  auto session = Session::connect(hosted.server->endpoint());
  EXPECT_TRUE(reply_of(session.hello("net")).is_ok());
  const auto bye_event = session.bye();
  const auto& bye = reply_of(bye_event);
  ASSERT_TRUE(bye.payload());
  EXPECT_EQ(std::get<msg::Ok>(*bye.payload()).message, "bye");
  EXPECT_TRUE(std::holds_alternative<Closed>(session.receive(Millis{2000})));
  EXPECT_TRUE(wait_for([&] { return hosted.server->active_sessions() == 0; }));
  EXPECT_EQ(hosted.server->crash_count(), 0u);
  hosted.server->shutdown();
}

TEST(ServerNet, ShutdownDropsIdleSessions) {
  Hosted hosted(FlawSet::hardened());
  auto session = Session::connect(hosted.server->endpoint());
  ASSERT_TRUE(wait_for([&] { return hosted.server->active_sessions() == 1; }));
  const auto start = Clock::now();
  hosted.server->shutdown();
  EXPECT_LT(Clock::now() - start, Millis{2000});
  EXPECT_TRUE(std::holds_alternative<Closed>(session.receive(Millis{2000})));
}

TEST(ServerNet, TruncatedFrameTimesOutAndSessionContinues) {
  Hosted hosted(FlawSet::hardened(), Millis{200});
  auto session = Session::connect(hosted.server->endpoint());
  client::RawFrameSpec partial = client::RawFrameSpec::honest(msg::Hello{"abc"});
  partial.declared_length = 20;
  session.send_raw(partial);
  const auto event = session.receive(Millis{3000});
  const auto& r = reply_of(event);
  EXPECT_EQ(r.err_code(), static_cast<std::uint8_t>(ErrCode::Malformed));
  EXPECT_TRUE(reply_of(session.hello("after")).is_ok());
}

TEST(ServerNet, OversizedFrameRefusedThenClosed) {
  Hosted hosted(FlawSet::hardened());
  auto session = Session::connect(hosted.server->endpoint());
  client::RawFrameSpec big = client::RawFrameSpec::honest(msg::Hello{"abc"});
  big.declared_length = kMaxFramePayload + 1;
  session.send_raw(big);
  EXPECT_EQ(reply_of(session.receive()).err_code(), static_cast<std::uint8_t>(ErrCode::FrameTooLarge));
  EXPECT_TRUE(std::holds_alternative<Closed>(session.receive(Millis{2000})));
}

TEST(ServerNet, CrashInOneSessionSparesAnother) {
  Hosted hosted(FlawSet::only(Flaw::F2OverrunLeak));
  auto victim = Session::connect(hosted.server->endpoint());
  auto bystander = Session::connect(hosted.server->endpoint());
  ASSERT_TRUE(reply_of(victim.hello("victim")).is_ok());
  ASSERT_TRUE(reply_of(bystander.hello("bystander")).is_ok());

  victim.send(msg::PutReq{"v.bin", 400, 4});
  ASSERT_TRUE(reply_of(victim.receive()).is_ok());
  victim.send(msg::Data{0, Bytes(300, 'v')});
  EXPECT_TRUE(std::holds_alternative<Closed>(victim.receive(Millis{3000})));
  EXPECT_TRUE(wait_for([&] { return hosted.server->crash_count() == 1; }));

  const Bytes content = to_bytes("still standing");
  auto put = bystander.put_file("b.txt", content, 4);
  EXPECT_TRUE(put.ok());
  EXPECT_EQ(testing::read_file(hosted.root() / "b.txt"), "still standing");
  EXPECT_EQ(hosted.server->crash_count(), 1u);
}

TEST(ServerNet, ConcurrentUploadsDoNotMix) {
  Hosted hosted(FlawSet::hardened());
  std::vector<std::jthread> threads;
  std::vector<int> ok(4, 0);
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&, i] {
      auto s = Session::connect(hosted.server->endpoint());
      (void)s.hello("c" + std::to_string(i));
      const Bytes content(3000 + i, static_cast<std::uint8_t>('a' + i));
      ok[i] = s.put_file("f" + std::to_string(i), content, 256).ok();
    });
  }
  threads.clear();
  for (int i = 0; i < 4; ++i) {
    EXPECT_TRUE(ok[i]);
    EXPECT_EQ(testing::read_file(hosted.root() / ("f" + std::to_string(i))),
              std::string(3000 + i, static_cast<char>('a' + i)));
  }
}

TEST(ServerNet, StartRejectsBadConfig) {
  ServerConfig config;
  config.sandbox_root = "/definitely/not/here";
  EXPECT_THROW(Server::start(config), ConfigError);
}

}  // namespace
}  // namespace cft::server
