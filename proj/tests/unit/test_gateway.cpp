#include <gtest/gtest.h>

#include <json.hpp>
#include <set>
#include <thread>

#include "test_util.hpp"
#include "tracemark/digest.hpp"
#include "tracemark/gateway.hpp"
#include "tracemark/media.hpp"

using namespace tracemark;
using Json = nlohmann::json;

namespace {

nn::ModelSnapshot always(const nn::Shape& in, int classes, int cls) {
  nn::ModelSnapshot m = nn::build_model(in, {nn::dense(classes)}, 1);
  std::fill(m.layers[0].weights.begin(), m.layers[0].weights.end(), 0.0f);
  m.layers[0].bias[cls] = 5.0f;
  return m;
}

struct Fixture {
  std::shared_ptr<gateway::ServiceState> state = std::make_shared<gateway::ServiceState>();
  RgbImage key = testutil::random_image(32, 32, 77);
  acpt::Credential cred = acpt::make_credential("alice", "HN", {0, 1, 2, 3, 4, 5, 6, 7});

  Fixture() {
    state->model = always({1, 28, 28}, 10, 4);
    state->seed = 99;
    acpt::UserKeyBundle b;
    b.user_id = "alice";
    b.key_images = {key};
    b.detector = always(acpt::kDetectorInput, 2, acpt::kKeyClass);
    b.credential = cred;
    state->center.bundles.push_back(b);
    state->center.identities = acpt::enroll({}, cred, key, "alice");
  }
};

std::set<std::string> keys_of(const std::string& line) {
  std::set<std::string> k;
  const Json j = Json::parse(line);
  for (auto& [name, v] : j.items()) k.insert(name);
  return k;
}

}  // namespace

TEST(HandleLine, AuthorizedAndUnauthorizedShareSchema) {
  Fixture f;
  const RgbImage q = testutil::random_image(28, 28, 1);
  const auto good = gateway::handle_line(*f.state, gateway::make_request("r1", f.cred.encrypted_username, f.key, q).to_line());
  const auto bad = gateway::handle_line(*f.state, gateway::make_request("r2", "ffffffff", f.key, q).to_line());
  EXPECT_EQ(Json::parse(good)["class"], 4);
  EXPECT_EQ(Json::parse(bad)["class"], acpt::random_class(acpt::request_seed(99, "r2"), 10));
  EXPECT_EQ(keys_of(good), keys_of(bad));
  EXPECT_EQ(keys_of(good), (std::set<std::string>{"request_id", "class"}));
}

TEST(HandleLine, ErrorCodes) {
  Fixture f;
  auto code = [&](const std::string& line) { return Json::parse(gateway::handle_line(*f.state, line))["error_code"]; };
  EXPECT_EQ(code("not json"), "bad_json");
  EXPECT_EQ(code("[1,2]"), "bad_json");
  EXPECT_EQ(code(R"({"credential":"abcdefgh"})"), "bad_request");
  EXPECT_EQ(code(R"({"request_id":"x","credential":"abc","key_image":"","query_image":""})"), "bad_request");
  EXPECT_EQ(code(R"({"request_id":"x","credential":"abcdefgh","key_image":"!!","query_image":""})"), "bad_image");
  const std::string not_pnm = digest::base64_encode(std::vector<std::uint8_t>{1, 2, 3});
  const auto j = Json::parse(gateway::handle_line(
      *f.state, R"({"request_id":"y","credential":"abcdefgh","key_image":")" + not_pnm + R"(","query_image":")" +
                    not_pnm + R"("})"));
  EXPECT_EQ(j["error_code"], "bad_image");
  EXPECT_EQ(j["request_id"], "y");
}

TEST(Service, LoopbackMatchesDirectCalls) {
  Fixture f;
  auto svc = gateway::Service::start("127.0.0.1:0", f.state);
  ASSERT_NE(svc->port(), 0);
  gateway::Client client(svc->address(), std::chrono::seconds(10));
  for (int i = 0; i < 20; ++i) {
    const RgbImage q = testutil::random_image(28, 28, 100 + i);
    const std::string cred = i % 2 ? f.cred.encrypted_username : "0badc0de";
    const auto req = gateway::make_request("req-" + std::to_string(i), cred, f.key, q);
    const auto resp = client.infer(req);
    EXPECT_EQ(resp.request_id, req.request_id);
    EXPECT_EQ(resp.to_line(), gateway::handle_line(*f.state, req.to_line()));
  }
  svc->stop();
}

TEST(Service, ConcurrentClients) {
  Fixture f;
  auto svc = gateway::Service::start("127.0.0.1:0", f.state);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) {
        const auto req = gateway::make_request("c" + std::to_string(t) + "-" + std::to_string(i),
                                               f.cred.encrypted_username, f.key, testutil::random_image(28, 28, i));
        if (gateway::client_infer(svc->address(), req).class_index == 4) ++ok;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 20);
}

TEST(Service, OversizedLineThenRecovers) {
  Fixture f;
  auto svc = gateway::Service::start("127.0.0.1:0", f.state);
  gateway::Client client(svc->address(), std::chrono::seconds(20));
  const std::string huge(gateway::kMaxLineBytes + 10, 'a');
  EXPECT_EQ(Json::parse(client.round_trip(huge))["error_code"], "line_too_long");
  const auto req = gateway::make_request("after", f.cred.encrypted_username, f.key, testutil::random_image(28, 28, 2));
  EXPECT_EQ(client.infer(req).class_index, 4);
}

TEST(Service, ClientErrors) {
  Fixture f;
  auto svc = gateway::Service::start("127.0.0.1:0", f.state);
  gateway::Client client(svc->address(), std::chrono::seconds(5));
  gateway::InferRequest bad;
  bad.request_id = "z";
  bad.credential = "short";
  EXPECT_ERROR_CODE(client.infer(bad), ErrorCode::kProtocol);
  const std::string addr = svc->address();
  svc->stop();
  EXPECT_ERROR_CODE(gateway::client_infer(addr, bad, std::chrono::seconds(1)), ErrorCode::kTransport);
}

TEST(Service, BindFailure) {
  Fixture f;
  auto first = gateway::Service::start("127.0.0.1:0", f.state);
  EXPECT_ERROR_CODE(gateway::Service::start("127.0.0.1:" + std::to_string(first->port()), f.state),
                    ErrorCode::kStartup);
  EXPECT_ERROR_CODE(gateway::Service::start("no-such-host.invalid:1", f.state), ErrorCode::kStartup);
}
