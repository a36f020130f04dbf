#include <gtest/gtest.h>
#include <json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <future>
#include <thread>

#include "shad3s/checkpoint.hpp"
#include "shad3s/error.hpp"
#include "shad3s/inference.hpp"
#include "shad3s/render.hpp"
#include "shad3s/service.hpp"

// After Eigen: resolv.h defines _res.
#include <httplib.h>

using namespace shad3s;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const TamCatalog& catalog() {
  static const TamCatalog c = TamCatalog::builtin(256);
  return c;
}

BundleSpec toy(const std::string& name) {
  auto s = BundleSpec::for_model(name);
  s.base_width = 8;
  s.max_width = 32;
  s.depth = 6;
  s.disc_base_width = 8;
  s.resolution = 64;
  return s;
}

fs::path checkpoint_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "shad3s_service_ckpt";
    fs::remove_all(d);
    for (const std::string name : {"sp", "dm"}) {
      torch::manual_seed(name == "sp" ? 1 : 2);
      ModelBundle b(toy(name));
      save_checkpoint(b, d / (name + ".bin"));
    }
    return d;
  }();
  return dir;
}

// Ring drawn in ink on white paper.
Image ring(int w, int h) {
  Image im(w, h, 1.0f);
  const double cx = w / 2.0, cy = h / 2.0, r = std::min(w, h) / 3.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (std::abs(std::hypot(x + 0.5 - cx, y + 0.5 - cy) - r) < 1.5) im(x, y) = 0.0f;
  return im;
}

std::string png_string(const Image& im) {
  const auto b = encode_png(im);
  return {b.begin(), b.end()};
}

Image decode(const std::string& body) {
  return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ServiceConfig c;
    c.checkpoints = {checkpoint_dir() / "sp.bin", checkpoint_dir() / "dm.bin"};
    c.tam_resolution = 256;
    c.port = 0;
    service_ = new Service(c);
    port_ = service_->bind();
    thread_ = new std::thread([] { service_->listen(); });
    service_->wait_until_ready();
  }
  static void TearDownTestSuite() {
    service_->stop();
    thread_->join();
    delete thread_;
    delete service_;
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  httplib::Result complete(const std::string& png, const json& params) const {
    httplib::MultipartFormDataItems items{{"contour", png, "contour.png", "image/png"},
                                          {"params", params.dump(), "", "application/json"}};
    return client().Post("/v1/complete", items);
  }

  static Service* service_;
  static std::thread* thread_;
  static int port_;
};

Service* ServiceTest::service_ = nullptr;
std::thread* ServiceTest::thread_ = nullptr;
int ServiceTest::port_ = 0;

}  // namespace

TEST(Engine, IdenticalRequestsGiveIdenticalSketches) {
  CompletionEngine engine(load_checkpoint(checkpoint_dir() / "sp.bin"), catalog());
  CompletionRequest r{ring(90, 70), 60, 35, catalog().at(2).id, {}};
  const auto a = engine.complete(r);
  const auto b = engine.complete(r);
  EXPECT_EQ(encode_png(a.sketch), encode_png(b.sketch));
  EXPECT_EQ(a.sketch.width(), 90);
  EXPECT_EQ(a.sketch.height(), 70);
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_FALSE(a.low_confidence);

  // The derived seed depends on the drawing and on the parameters.
  auto other = r;
  other.azimuth = 61;
  EXPECT_NE(engine.complete(other).seed, a.seed);
  other = r;
  other.seed = 99;
  EXPECT_EQ(engine.complete(other).seed, 99u);
}

TEST(Engine, EmptyContourIsFlagged) {
  CompletionEngine engine(load_checkpoint(checkpoint_dir() / "dm.bin"), catalog());
  const auto r = engine.complete({Image(64, 64, 1.0f), 45, 30, catalog().at(0).id, {}});
  EXPECT_TRUE(r.low_confidence);
  EXPECT_EQ(r.note, "contour empty");
  EXPECT_EQ(r.sketch.width(), 64);
}

TEST(Engine, RejectsBadRequests) {
  CompletionEngine engine(load_checkpoint(checkpoint_dir() / "dm.bin"), catalog());
  EXPECT_THROW(engine.complete({ring(64, 64), 45, 30, "no-such-family", {}}), NotFoundError);
  EXPECT_THROW(engine.complete({ring(64, 64), 45, 0, catalog().at(0).id, {}}), RangeError);
  EXPECT_THROW(engine.complete({Image(), 45, 30, catalog().at(0).id, {}}), FormatError);
}

TEST(Engine, ConcurrentRequestsAgree) {
  CompletionEngine engine(load_checkpoint(checkpoint_dir() / "sp.bin"), catalog());
  const CompletionRequest r{ring(64, 64), 120, 50, catalog().at(4).id, {}};
  const auto expected = encode_png(engine.complete(r).sketch);
  std::vector<std::future<std::vector<std::uint8_t>>> jobs;
  for (int i = 0; i < 4; ++i)
    jobs.push_back(std::async(std::launch::async, [&] { return encode_png(engine.complete(r).sketch); }));
  for (auto& j : jobs) EXPECT_EQ(j.get(), expected);
}

TEST(Engine, HintIsTheRendererHint) {
  EXPECT_EQ(encode_png(illumination_hint(45, 30)), encode_png(render_gnomon_hint(LightSpec::from_angles(45, 30), 256, 256)));
  EXPECT_THROW(illumination_hint(45, 0), RangeError);
}

TEST_F(ServiceTest, Health) {
  auto res = client().Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body).at("status"), "ok");
}

TEST_F(ServiceTest, ModelsListed) {
  auto res = client().Get("/v1/models");
  ASSERT_TRUE(res);
  const auto list = json::parse(res->body);
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0].at("id"), "dm");
  EXPECT_EQ(list[1].at("id"), "sp");
  EXPECT_EQ(list[1].at("kind"), "split");
  EXPECT_EQ(list[1].at("resolution"), 64);
}

TEST_F(ServiceTest, TexturesSortedWithNestedThumbnails) {
  auto res = client().Get("/v1/textures");
  ASSERT_TRUE(res);
  const auto list = json::parse(res->body);
  ASSERT_EQ(list.size(), 6u);
  for (std::size_t i = 1; i < list.size(); ++i) EXPECT_LT(list[i - 1].at("id"), list[i].at("id"));
  for (const auto& f : list) {
    ASSERT_EQ(f.at("thumbnails").size(), 4u);
    const auto cov = f.at("coverage").get<std::vector<double>>();
    for (int t = 1; t < 4; ++t) EXPECT_GT(cov[t - 1], cov[t]) << f.at("id");
    const std::string uri = f.at("thumbnails")[0];
    EXPECT_EQ(uri.rfind("data:image/png;base64,", 0), 0u);
  }
}

TEST_F(ServiceTest, IlluminationMatchesRenderer) {
  auto a = client().Get("/v1/illumination?azimuth=45&elevation=30");
  auto b = client().Get("/v1/illumination?azimuth=45&elevation=30");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->status, 200);
  EXPECT_EQ(a->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(a->body, b->body);
  EXPECT_EQ(a->body, png_string(render_gnomon_hint(LightSpec::from_angles(45, 30), 256, 256)));

  EXPECT_EQ(client().Get("/v1/illumination?azimuth=45&elevation=0")->status, 400);
  EXPECT_EQ(client().Get("/v1/illumination?azimuth=45")->status, 400);
  EXPECT_EQ(client().Get("/v1/illumination?azimuth=north&elevation=30")->status, 400);
}

TEST_F(ServiceTest, CompleteIsByteIdentical) {
  const auto contour = png_string(ring(80, 120));
  const json params{{"azimuth", 30}, {"elevation", 40}, {"texture", catalog().at(1).id}, {"model", "sp"}};
  auto a = complete(contour, params);
  auto b = complete(contour, params);
  ASSERT_TRUE(a && b);
  ASSERT_EQ(a->status, 200) << a->body;
  EXPECT_EQ(a->body, b->body);
  const auto im = decode(a->body);
  EXPECT_EQ(im.width(), 80);
  EXPECT_EQ(im.height(), 120);
  const auto meta = json::parse(a->get_header_value("X-Shad3s-Meta"));
  EXPECT_EQ(meta.at("model"), "sp");
  EXPECT_FALSE(meta.at("low_confidence").get<bool>());

  // Same bytes as calling the engine directly.
  CompletionEngine engine(load_checkpoint(checkpoint_dir() / "sp.bin"), catalog());
  EXPECT_EQ(a->body, png_string(engine.complete({decode(contour), 30, 40, catalog().at(1).id, {}}).sketch));
}

TEST_F(ServiceTest, CompleteFlagsEmptyContour) {
  auto res = complete(png_string(Image(50, 50, 1.0f)), json{{"model", "dm"}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto meta = json::parse(res->get_header_value("X-Shad3s-Meta"));
  EXPECT_TRUE(meta.at("low_confidence").get<bool>());
  EXPECT_EQ(meta.at("note"), "contour empty");
}

TEST_F(ServiceTest, CompleteErrors) {
  const auto contour = png_string(ring(64, 64));
  EXPECT_EQ(complete(contour, json{{"model", "zz"}})->status, 404);
  EXPECT_EQ(complete(contour, json{{"texture", "zz"}})->status, 404);
  EXPECT_EQ(complete("not a png", json::object())->status, 400);
  EXPECT_EQ(complete(contour, json{{"elevation", -5}})->status, 400);
  EXPECT_EQ(complete(contour, json{{"azimuth", "east"}})->status, 400);
  httplib::MultipartFormDataItems bad_json{{"contour", contour, "c.png", "image/png"}, {"params", "{oops", "", ""}};
  EXPECT_EQ(client().Post("/v1/complete", bad_json)->status, 400);
  EXPECT_EQ(client().Post("/v1/complete", "{}", "application/json")->status, 400);
}

TEST(ServiceConfig, ReadsEnvironment) {
  setenv("SHAD3S_CKPT_DIR", checkpoint_dir().c_str(), 1);
  setenv("SHAD3S_PORT", "9123", 1);
  const auto c = ServiceConfig::from_env();
  EXPECT_EQ(c.port, 9123);
  ASSERT_EQ(c.checkpoints.size(), 2u);
  EXPECT_EQ(c.checkpoints[0].filename(), "dm.bin");
  setenv("SHAD3S_PORT", "eighty", 1);
  EXPECT_THROW(ServiceConfig::from_env(), RangeError);
  unsetenv("SHAD3S_PORT");
  unsetenv("SHAD3S_CKPT_DIR");
}
