#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>

#include "boxrefine/remote_segmenter.hpp"
#include "test_util.hpp"

using namespace boxrefine;
using testing_util::axis_view;

namespace {

/// In-process stand-in for the segmentation service. The handler decides the
/// reply; every request body is recorded.
class FakeServer {
 public:
  using Handler = std::function<void(const nlohmann::json&, httplib::Response&)>;

  explicit FakeServer(Handler h) : handler_(std::move(h)) {
    server_.Post("/segment", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      {
        std::lock_guard lock(mu_);
        bodies_.push_back(body);
      }
      handler_(body, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::vector<nlohmann::json> bodies() const {
    std::lock_guard lock(mu_);
    return bodies_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> bodies_;
};

/// Scores i / n over the requested frame.
ScoreMask ramp(int w, int h) {
  ScoreMask m(w, h);
  for (std::size_t i = 0; i < m.scores.size(); ++i) m.scores[i] = static_cast<float>(i) / static_cast<float>(m.scores.size());
  return m;
}

void reply_ramp(const nlohmann::json& req, httplib::Response& res) {
  const int w = req["width"], h = req["height"];
  const nlohmann::json out = {{"width", w}, {"height", h}, {"scores_f32_b64", remote_detail::encode_scores(ramp(w, h))}};
  res.set_content(out.dump(), "application/json");
}

FakeServer::Handler reply_status(int status) {
  return [status](const nlohmann::json&, httplib::Response& res) {
    res.status = status;
    res.set_content("{\"error\":\"nope\"}", "application/json");
  };
}

FakeServer::Handler reply_raw(nlohmann::json body) {
  return [body](const nlohmann::json&, httplib::Response& res) { res.set_content(body.dump(), "application/json"); };
}

CameraView small_view(std::int32_t id = 3) {
  auto v = axis_view(id, 4, 3, 1, 0, 0);
  for (std::size_t i = 0; i < v.depth.size(); ++i) v.depth[i] = static_cast<float>(i);
  return v;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) << 24 | static_cast<std::uint32_t>(b[at + 1]) << 16 |
         static_cast<std::uint32_t>(b[at + 2]) << 8 | static_cast<std::uint32_t>(b[at + 3]);
}

}  // namespace

TEST(RemoteWireFormat, ScoresAreLittleEndianFloat32Base64) {
  ScoreMask m(2, 1);
  m.scores = {1.0f, 0.5f};
  // bytes 00 00 80 3f 00 00 00 3f
  EXPECT_EQ(remote_detail::encode_scores(m), "AACAPwAAAD8=");
  const nlohmann::json body = {{"width", 2}, {"height", 1}, {"scores_f32_b64", "AACAPwAAAD8="}};
  EXPECT_EQ(remote_detail::decode_response(body.dump(), 2, 1), m);
}

TEST(RemoteWireFormat, PromptJson) {
  EXPECT_EQ(remote_detail::prompt_json(BoxPrompt{1, 2, 3, 4}),
            nlohmann::json::parse(R"({"type":"box","xyxy":[1,2,3,4]})"));
  EXPECT_EQ(remote_detail::prompt_json(PointPrompt{5, 6}),
            nlohmann::json::parse(R"({"type":"point","xy":[5,6],"label":1})"));
  const std::vector<PointPrompt> neg = {{7, 8}};
  EXPECT_EQ(remote_detail::combined_prompt_json(BoxPrompt{1, 2, 3, 4}, neg),
            nlohmann::json::parse(R"({"type":"multi","box":[1,2,3,4],"points":[{"xy":[7,8],"label":0}]})"));
}

TEST(RemoteWireFormat, MalformedResponsesAreProtocolErrors) {
  EXPECT_THROW(remote_detail::decode_response("not json", 2, 1), ProtocolError);
  EXPECT_THROW(remote_detail::decode_response(R"({"width":2,"height":1})", 2, 1), ProtocolError);
  EXPECT_THROW(remote_detail::decode_response(R"({"width":2,"height":1,"scores_f32_b64":"***"})", 2, 1), ProtocolError);
  // one float for a two-pixel frame
  EXPECT_THROW(remote_detail::decode_response(R"({"width":2,"height":1,"scores_f32_b64":"AACAPw=="})", 2, 1),
               ProtocolError);
  // 2.0f = 00 00 00 40
  EXPECT_THROW(remote_detail::decode_response(R"({"width":1,"height":1,"scores_f32_b64":"AAAAQA=="})", 1, 1),
               ProtocolError);
}

TEST(RemoteSegmenter, RoundTripsAMask) {
  FakeServer server(reply_ramp);
  RemoteSegmenter seg(server.endpoint());
  const auto v = small_view();
  EXPECT_EQ(seg.segment(v, BoxPrompt{0, 0, 2, 2}), ramp(4, 3));
  const auto bodies = server.bodies();
  ASSERT_EQ(bodies.size(), 1u);
  EXPECT_EQ(bodies[0]["width"], 4);
  EXPECT_EQ(bodies[0]["height"], 3);
  EXPECT_EQ(bodies[0]["prompt"]["type"], "box");
}

TEST(RemoteSegmenter, UploadsEachImageOnceAsPng) {
  FakeServer server(reply_ramp);
  RemoteSegmenter seg(server.endpoint());
  const auto v = small_view();
  seg.segment(v, BoxPrompt{0, 0, 2, 2});
  seg.segment(v, PointPrompt{1, 1});
  const auto bodies = server.bodies();
  ASSERT_EQ(bodies.size(), 2u);
  ASSERT_TRUE(bodies[0].contains("image_png_b64"));
  EXPECT_FALSE(bodies[1].contains("image_png_b64"));
  EXPECT_EQ(bodies[0]["image_id"], bodies[1]["image_id"]);
  const auto png = remote_detail::base64_decode(bodies[0]["image_png_b64"].get<std::string>());
  ASSERT_GE(png.size(), 24u);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  EXPECT_TRUE(std::equal(sig, sig + 8, png.begin()));
  EXPECT_EQ(be32(png, 16), 4u);
  EXPECT_EQ(be32(png, 20), 3u);
}

TEST(RemoteSegmenter, DistinctViewsGetDistinctImageIds) {
  FakeServer server(reply_ramp);
  RemoteSegmenter seg(server.endpoint());
  seg.segment(small_view(1), PointPrompt{0, 0});
  seg.segment(small_view(2), PointPrompt{0, 0});
  const auto bodies = server.bodies();
  EXPECT_NE(bodies[0]["image_id"], bodies[1]["image_id"]);
  EXPECT_TRUE(bodies[1].contains("image_png_b64"));
}

TEST(RemoteSegmenter, RepeatedQueryHitsTheCache) {
  FakeServer server(reply_ramp);
  RemoteSegmenter seg(server.endpoint());
  const auto v = small_view();
  const auto a = seg.segment(v, PointPrompt{2, 1});
  const auto b = seg.segment(v, PointPrompt{2, 1});
  EXPECT_EQ(a, b);
  EXPECT_EQ(seg.requests_sent(), 1u);
  EXPECT_EQ(server.bodies().size(), 1u);
  seg.segment(v, PointPrompt{2, 2});
  EXPECT_EQ(seg.requests_sent(), 2u);
}

TEST(RemoteSegmenter, CombinedQueryCarriesNegatives) {
  FakeServer server(reply_ramp);
  RemoteSegmenter seg(server.endpoint());
  const std::vector<PointPrompt> neg = {{0, 0}, {3, 2}};
  seg.segment_combined(small_view(), BoxPrompt{1, 1, 2, 2}, neg);
  const auto bodies = server.bodies();
  ASSERT_EQ(bodies.size(), 1u);
  EXPECT_EQ(bodies[0]["prompt"]["points"].size(), 2u);
  EXPECT_EQ(bodies[0]["prompt"]["points"][1]["label"], 0);
}

TEST(RemoteSegmenter, DimensionMismatchIsProtocolError) {
  FakeServer server([](const nlohmann::json&, httplib::Response& res) {
    const nlohmann::json out = {{"width", 10}, {"height", 10}, {"scores_f32_b64", remote_detail::encode_scores(ScoreMask(10, 10))}};
    res.set_content(out.dump(), "application/json");
  });
  RemoteSegmenter seg(server.endpoint());
  EXPECT_THROW(seg.segment(axis_view(0, 20, 20, 1, 0, 0), PointPrompt{0, 0}), ProtocolError);
}

TEST(RemoteSegmenter, HttpStatusesMapToErrorKinds) {
  {
    FakeServer server(reply_status(400));
    EXPECT_THROW(RemoteSegmenter(server.endpoint()).segment(small_view(), PointPrompt{0, 0}), ProtocolError);
  }
  {
    FakeServer server(reply_status(422));
    EXPECT_THROW(RemoteSegmenter(server.endpoint()).segment(small_view(), PointPrompt{0, 0}), ProtocolError);
  }
  {
    FakeServer server(reply_status(503));
    EXPECT_THROW(RemoteSegmenter(server.endpoint()).segment(small_view(), PointPrompt{0, 0}), TransportError);
  }
  {
    FakeServer server(reply_status(500));
    EXPECT_THROW(RemoteSegmenter(server.endpoint()).segment(small_view(), PointPrompt{0, 0}), ProtocolError);
  }
}

TEST(RemoteSegmenter, FailedQueriesAreNotCached) {
  std::atomic<int> calls{0};
  FakeServer server([&calls](const nlohmann::json& req, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      return;
    }
    reply_ramp(req, res);
  });
  RemoteSegmenter seg(server.endpoint());
  EXPECT_THROW(seg.segment(small_view(), PointPrompt{0, 0}), TransportError);
  EXPECT_EQ(seg.segment(small_view(), PointPrompt{0, 0}), ramp(4, 3));
  // the image was never accepted, so the retry uploads it again
  EXPECT_TRUE(server.bodies()[1].contains("image_png_b64"));
}

TEST(RemoteSegmenter, OutOfRangeScoresRejected) {
  FakeServer server(reply_raw({{"width", 1}, {"height", 1}, {"scores_f32_b64", "AAAAQA=="}}));
  EXPECT_THROW(RemoteSegmenter(server.endpoint()).segment(axis_view(0, 1, 1, 1, 0, 0), PointPrompt{0, 0}), ProtocolError);
}

TEST(RemoteSegmenter, NoServerIsTransportError) {
  // bind and release a port so nothing listens on it
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  RemoteSegmenter seg("http://127.0.0.1:" + std::to_string(port), {1, 1, 1});
  EXPECT_THROW(seg.segment(small_view(), PointPrompt{0, 0}), TransportError);
}

TEST(RemoteSegmenter, WorksThroughInstanceViewMask) {
  FakeServer server(reply_ramp);
  RemoteSegmenter seg(server.endpoint());
  const auto v = small_view();
  const std::vector<Pixel> px = {{1, 1}};
  SegmenterConfig cfg;
  cfg.window = 2;
  cfg.beta = 0.5;
  const auto m = instance_view_mask(seg, v, px, cfg);
  const auto bg = background_window_prompts(px, 4, 3, 2);
  ASSERT_FALSE(bg.empty());
  // every prompt gets the same ramp back
  std::vector<ScoreMask> bgs(bg.size(), ramp(4, 3));
  EXPECT_EQ(m, merge_masks(ramp(4, 3), bgs, 0.5));
  EXPECT_EQ(seg.requests_sent(), 1 + bg.size());
}

TEST(ResolveEndpoint, ConfigBeatsEnvironment) {
  ::setenv("SEGMENTER_ENDPOINT", "http://env:1", 1);
  SegmenterConfig cfg;
  EXPECT_EQ(resolve_endpoint(cfg), "http://env:1");
  cfg.endpoint = "http://cfg:2";
  EXPECT_EQ(resolve_endpoint(cfg), "http://cfg:2");
  ::unsetenv("SEGMENTER_ENDPOINT");
  EXPECT_EQ(resolve_endpoint(SegmenterConfig{}), "");
}

TEST(ResolveEndpoint, EmptyEndpointIsConfigError) {
  EXPECT_THROW(RemoteSegmenter(""), ConfigError);
}
