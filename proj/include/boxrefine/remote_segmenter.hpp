#pragma once

// HTTP/JSON client for an out-of-process promptable segmenter.
//
//   POST /segment  {"image_id", "width", "height", "image_png_b64"?, "prompt"}
//   200            {"width", "height", "scores_f32_b64"}
//
// Each view image is uploaded with its first request only. Responses are
// cached by a hash of (image, prompt).

#include <png.h>
#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

// Eigen must precede httplib: <resolv.h> defines a _res macro that breaks it.
#include "boxrefine/error.hpp"
#include "boxrefine/prompting.hpp"
#include "boxrefine/scene.hpp"

#include <httplib.h>
#include <json.hpp>

namespace boxrefine {

namespace remote_detail {

inline void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error("libsodium failed to initialise");
}

inline std::string base64_encode(const void* data, std::size_t n) {
  ensure_sodium();
  std::string out(sodium_base64_ENCODED_LEN(n, sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), static_cast<const unsigned char*>(data), n,
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(std::strlen(out.c_str()));
  return out;
}

inline std::vector<unsigned char> base64_decode(const std::string& s) {
  ensure_sodium();
  std::vector<unsigned char> out(s.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), s.data(), s.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw ProtocolError("segmenter response: invalid base64 payload");
  }
  out.resize(len);
  return out;
}

inline std::string hex_digest(const std::string& data, std::size_t bytes = 16) {
  ensure_sodium();
  std::vector<unsigned char> h(bytes);
  crypto_generichash(h.data(), h.size(), reinterpret_cast<const unsigned char*>(data.data()), data.size(), nullptr, 0);
  std::string out(bytes * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), h.data(), h.size());
  out.pop_back();
  return out;
}

/// 8-bit PNG in memory; `channels` is 1 (gray) or 3 (RGB).
inline std::string encode_png(const std::vector<std::uint8_t>& pixels, int width, int height, int channels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: cannot create info");
  }
  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

/// The view's colour image, or its depth scaled to 8-bit gray when it has none.
inline std::string view_png(const CameraView& v) {
  if (!v.rgb.empty()) return encode_png(v.rgb, v.width, v.height, 3);
  float max_d = 0.0f;
  for (float d : v.depth) max_d = std::max(max_d, d);
  std::vector<std::uint8_t> gray(v.depth.size(), 0);
  if (max_d > 0.0f) {
    for (std::size_t i = 0; i < gray.size(); ++i) {
      gray[i] = static_cast<std::uint8_t>(std::lround(255.0f * v.depth[i] / max_d));
    }
  }
  return encode_png(gray, v.width, v.height, 1);
}

inline std::string image_id(const CameraView& v) {
  std::string key = std::to_string(v.id) + ":" + std::to_string(v.width) + "x" + std::to_string(v.height) + ":";
  key.append(reinterpret_cast<const char*>(v.depth.data()), v.depth.size() * sizeof(float));
  key.append(reinterpret_cast<const char*>(v.rgb.data()), v.rgb.size());
  return "view" + std::to_string(v.id) + "-" + hex_digest(key);
}

inline nlohmann::json prompt_json(const Prompt& p) {
  if (const auto* b = std::get_if<BoxPrompt>(&p)) {
    return {{"type", "box"}, {"xyxy", {b->x_min, b->y_min, b->x_max, b->y_max}}};
  }
  const auto& pt = std::get<PointPrompt>(p);
  return {{"type", "point"}, {"xy", {pt.x, pt.y}}, {"label", 1}};
}

inline nlohmann::json combined_prompt_json(const BoxPrompt& b, std::span<const PointPrompt> negatives) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : negatives) pts.push_back({{"xy", {p.x, p.y}}, {"label", 0}});
  return {{"type", "multi"}, {"box", {b.x_min, b.y_min, b.x_max, b.y_max}}, {"points", pts}};
}

/// Parses a 200 response body into a mask of the expected size.
inline ScoreMask decode_response(const std::string& body, int width, int height) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("segmenter response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("width") || !j.contains("height") || !j.contains("scores_f32_b64") ||
      !j["width"].is_number_integer() || !j["height"].is_number_integer() || !j["scores_f32_b64"].is_string()) {
    throw ProtocolError("segmenter response lacks width/height/scores_f32_b64");
  }
  const int w = j["width"].get<int>(), h = j["height"].get<int>();
  if (w != width || h != height) {
    throw ProtocolError("segmenter returned a " + std::to_string(w) + "x" + std::to_string(h) + " mask for a " +
                        std::to_string(width) + "x" + std::to_string(height) + " view");
  }
  const auto raw = base64_decode(j["scores_f32_b64"].get<std::string>());
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (raw.size() != n * 4) {
    throw ProtocolError("segmenter payload holds " + std::to_string(raw.size()) + " bytes, expected " +
                        std::to_string(n * 4));
  }
  ScoreMask m(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) | static_cast<std::uint32_t>(raw[4 * i + 1]) << 8 |
                               static_cast<std::uint32_t>(raw[4 * i + 2]) << 16 |
                               static_cast<std::uint32_t>(raw[4 * i + 3]) << 24;
    float f;
    std::memcpy(&f, &bits, sizeof f);
    if (!std::isfinite(f) || f < 0.0f || f > 1.0f) {
      throw ProtocolError("segmenter score " + std::to_string(f) + " at pixel " + std::to_string(i) +
                          " is outside [0, 1]");
    }
    m.scores[i] = f;
  }
  return m;
}

/// Row-major little-endian float32 encoding, the inverse of decode_response's payload.
inline std::string encode_scores(const ScoreMask& m) {
  std::string raw(m.scores.size() * 4, '\0');
  for (std::size_t i = 0; i < m.scores.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &m.scores[i], sizeof bits);
    for (int b = 0; b < 4; ++b) raw[4 * i + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  return base64_encode(raw.data(), raw.size());
}

}  // namespace remote_detail

/// Endpoint from the config, else from SEGMENTER_ENDPOINT; empty when neither is set.
inline std::string resolve_endpoint(const SegmenterConfig& cfg) {
  if (!cfg.endpoint.empty()) return cfg.endpoint;
  const char* env = std::getenv("SEGMENTER_ENDPOINT");
  return env ? std::string(env) : std::string();
}

struct RemoteOptions {
  int connect_timeout_s = 5;
  int read_timeout_s = 120;
  int pool_size = 1;
};

class RemoteSegmenter final : public Segmenter {
 public:
  explicit RemoteSegmenter(std::string endpoint, RemoteOptions opts = {})
      : endpoint_(std::move(endpoint)), opts_(opts) {
    if (endpoint_.empty()) throw ConfigError("remote segmenter: no endpoint (set SEGMENTER_ENDPOINT)");
    remote_detail::ensure_sodium();
  }

  ScoreMask segment(const CameraView& view, const Prompt& prompt) override {
    return query(view, remote_detail::prompt_json(prompt));
  }

  ScoreMask segment_combined(const CameraView& view, const BoxPrompt& box,
                             std::span<const PointPrompt> negatives) override {
    return query(view, remote_detail::combined_prompt_json(box, negatives));
  }

  /// Backend requests issued so far (cache hits excluded).
  std::size_t requests_sent() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  ScoreMask query(const CameraView& view, const nlohmann::json& prompt) {
    const std::string id = remote_detail::image_id(view);
    const std::string key = remote_detail::hex_digest(id + "|" + prompt.dump());
    bool upload = false;
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
      upload = !uploaded_.count(id);
    }
    nlohmann::json body = {{"image_id", id}, {"width", view.width}, {"height", view.height}, {"prompt", prompt}};
    if (upload) body["image_png_b64"] = png_b64_for(view);

    auto client = acquire();
    const auto res = client->Post("/segment", body.dump(), "application/json");
    release(std::move(client));
    if (!res) {
      throw TransportError("segmenter at " + endpoint_ + " unreachable: " + httplib::to_string(res.error()));
    }
    switch (res->status) {
      case 200:
        break;
      case 503:
        throw TransportError("segmenter at " + endpoint_ + " not ready (503)");
      case 400:
        throw ProtocolError("segmenter rejected the prompt as malformed (400): " + res->body);
      case 422:
        throw ProtocolError("segmenter reported a bounds/dimension violation (422): " + res->body);
      default:
        throw ProtocolError("segmenter answered HTTP " + std::to_string(res->status));
    }
    ScoreMask m = remote_detail::decode_response(res->body, view.width, view.height);
    std::lock_guard lock(mu_);
    ++requests_;
    uploaded_.insert(id);
    cache_.emplace(key, m);
    return m;
  }

  std::string png_b64_for(const CameraView& v) {
    const std::string png = remote_detail::view_png(v);
    return remote_detail::base64_encode(png.data(), png.size());
  }

  std::unique_ptr<httplib::Client> acquire() {
    {
      std::lock_guard lock(mu_);
      if (!pool_.empty()) {
        auto c = std::move(pool_.back());
        pool_.pop_back();
        return c;
      }
    }
    auto c = std::make_unique<httplib::Client>(endpoint_);
    c->set_connection_timeout(opts_.connect_timeout_s, 0);
    c->set_read_timeout(opts_.read_timeout_s, 0);
    c->set_keep_alive(true);
    return c;
  }

  void release(std::unique_ptr<httplib::Client> c) {
    std::lock_guard lock(mu_);
    if (static_cast<int>(pool_.size()) < std::max(1, opts_.pool_size)) pool_.push_back(std::move(c));
  }

  std::string endpoint_;
  RemoteOptions opts_;
  mutable std::mutex mu_;
  std::size_t requests_ = 0;
  std::unordered_map<std::string, ScoreMask> cache_;
  std::set<std::string> uploaded_;
  std::vector<std::unique_ptr<httplib::Client>> pool_;
};

}  // namespace boxrefine
