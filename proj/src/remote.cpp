// Eigen must come before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "uncerseg/segmenter.hpp"

#include <httplib.h>
#include <json.hpp>

#include <condition_variable>
#include <mutex>
#include <thread>

namespace uncerseg {

using nlohmann::json;

namespace {

json box_to_json(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ProtocolError("box must be an array of 4 numbers");
  for (const auto& v : j) {
    if (!v.is_number()) throw ProtocolError("box must be an array of 4 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed JSON body: ") + e.what());
  }
}

Bytes decode_b64_field(const json& j, const char* what) {
  if (!j.is_string()) throw ProtocolError(std::string(what) + " must be a base64 string");
  try {
    return base64_decode(j.get<std::string>());
  } catch (const DomainError& e) {
    throw ProtocolError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string encode_request_json(const SegmentRequest& request) {
  json boxes = json::array();
  for (const auto& b : request.boxes) boxes.push_back(box_to_json(b));
  json points = json::array();
  for (const auto& p : request.points) {
    points.push_back({{"x", p.x}, {"y", p.y}, {"label", std::string(to_string(p.label))}});
  }
  return json{{"image", base64_encode(request.image_png)}, {"boxes", boxes}, {"points", points}}.dump();
}

SegmentRequest decode_request_json(const std::string& body) {
  const json j = parse_body(body);
  if (!j.is_object() || !j.contains("image") || !j.contains("boxes")) {
    throw ProtocolError("request needs 'image' and 'boxes'");
  }
  SegmentRequest out;
  out.image_png = decode_b64_field(j["image"], "image");
  if (!j["boxes"].is_array()) throw ProtocolError("'boxes' must be an array");
  for (const auto& b : j["boxes"]) out.boxes.push_back(box_from_json(b));
  if (j.contains("points")) {
    if (!j["points"].is_array()) throw ProtocolError("'points' must be an array");
    for (const auto& p : j["points"]) {
      if (!p.is_object() || !p.contains("x") || !p.contains("y") || !p["x"].is_number() || !p["y"].is_number()) {
        throw ProtocolError("point needs numeric 'x' and 'y'");
      }
      PointPrompt pt{p["x"].get<double>(), p["y"].get<double>(), PointLabel::positive};
      if (p.contains("label")) {
        if (!p["label"].is_string()) throw ProtocolError("point label must be a string");
        try {
          pt.label = parse_point_label(p["label"].get<std::string>());
        } catch (const DomainError& e) {
          throw ProtocolError(e.what());
        }
      }
      out.points.push_back(pt);
    }
  }
  return out;
}

std::string encode_response_json(const SegmentResponse& response) {
  json masks = json::array();
  for (const auto& m : response.mask_pngs) masks.push_back(base64_encode(m));
  return json{{"masks", masks}}.dump();
}

SegmentResponse decode_response_json(const std::string& body) {
  const json j = parse_body(body);
  if (!j.is_object() || !j.contains("masks") || !j["masks"].is_array()) {
    throw ProtocolError("response needs a 'masks' array");
  }
  SegmentResponse out;
  for (const auto& m : j["masks"]) out.mask_pngs.push_back(decode_b64_field(m, "mask"));
  return out;
}

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw DomainError("endpoint must look like http://host:port");
  if (url.compare(0, scheme, "http") != 0) throw DomainError("only http:// endpoints are supported");
  const auto path = url.find('/', scheme + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path);
  if (path != std::string::npos) {
    e.base_path = url.substr(path);
    while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  }
  if (e.scheme_host_port.size() <= scheme + 3) throw DomainError("endpoint has no host");
  return e;
}

// Fixed set of keep-alive clients; a caller borrows one for a whole request.
class RemoteSegmenter::Pool {
 public:
  Pool(const Endpoint& endpoint, const RemoteOptions& options)
      : segment_path(endpoint.base_path + "/v1/segment"), health_path(endpoint.base_path + "/v1/health") {
    const std::size_t n = std::max<std::size_t>(1, options.pool_size);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = std::make_unique<httplib::Client>(endpoint.scheme_host_port);
      c->set_connection_timeout(options.timeout);
      c->set_read_timeout(options.timeout);
      c->set_write_timeout(options.timeout);
      c->set_keep_alive(true);
      idle_.push_back(c.get());
      clients_.push_back(std::move(c));
    }
  }

  class Lease {
   public:
    Lease(Pool& pool, httplib::Client* c) : pool_(pool), client_(c) {}
    ~Lease() { pool_.give_back(client_); }
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    httplib::Client& operator*() const { return *client_; }
    httplib::Client* operator->() const { return client_; }

   private:
    Pool& pool_;
    httplib::Client* client_;
  };

  Lease borrow() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !idle_.empty(); });
    httplib::Client* c = idle_.back();
    idle_.pop_back();
    return Lease(*this, c);
  }

  std::size_t size() const { return clients_.size(); }

  const std::string segment_path;
  const std::string health_path;

 private:
  void give_back(httplib::Client* c) {
    {
      std::lock_guard lock(mu_);
      idle_.push_back(c);
    }
    cv_.notify_one();
  }

  std::vector<std::unique_ptr<httplib::Client>> clients_;
  std::vector<httplib::Client*> idle_;
  std::mutex mu_;
  std::condition_variable cv_;
};

RemoteSegmenter::RemoteSegmenter(std::string endpoint_url, RemoteOptions options)
    : pool_(std::make_unique<Pool>(parse_endpoint(endpoint_url), options)), options_(options) {
  if (options_.retries < 0) throw DomainError("retries must be >= 0");
}

RemoteSegmenter::~RemoteSegmenter() = default;

std::size_t RemoteSegmenter::max_boxes_per_call() const { return 64; }
std::size_t RemoteSegmenter::preferred_parallelism() const { return pool_->size(); }

SegmentResponse RemoteSegmenter::segment(const SegmentRequest& request) const {
  const std::string body = encode_request_json(request);
  const std::string& path = pool_->segment_path;

  httplib::Result res;
  auto delay = options_.base_delay;
  for (int attempt = 0;; ++attempt) {
    {
      auto client = pool_->borrow();
      res = client->Post(path, body, "application/json");
    }
    if (res) break;
    if (attempt >= options_.retries) {
      throw TransportError("POST " + path + " failed after " + std::to_string(attempt + 1) +
                           " attempt(s): " + httplib::to_string(res.error()));
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }

  if (res->status != 200) {
    std::string message = res->body;
    try {
      const json j = json::parse(res->body);
      if (j.is_object() && j.contains("error") && j["error"].is_string()) message = j["error"].get<std::string>();
    } catch (const json::exception&) {
    }
    throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " + message);
  }

  SegmentResponse response = decode_response_json(res->body);
  if (response.mask_pngs.size() != request.boxes.size()) {
    throw ProtocolError("expected " + std::to_string(request.boxes.size()) + " masks, got " +
                        std::to_string(response.mask_pngs.size()));
  }
  return response;
}

std::vector<ProbMask> RemoteSegmenter::segment_masks(const SegmentRequest& request) const {
  const GrayImage image = decode_gray8_png(request.image_png);
  const SegmentResponse response = segment(request);
  std::vector<ProbMask> out;
  out.reserve(response.mask_pngs.size());
  for (std::size_t i = 0; i < response.mask_pngs.size(); ++i) {
    ProbMask m;
    try {
      m = decode_prob_png(response.mask_pngs[i]);
    } catch (const IoError& e) {
      throw ProtocolError("mask " + std::to_string(i) + ": " + e.what());
    }
    if (m.rows() != image.rows() || m.cols() != image.cols()) {
      throw ProtocolError("mask " + std::to_string(i) + " has wrong dimensions");
    }
    out.push_back(std::move(m));
  }
  return out;
}

ProbMask RemoteSegmenter::segment_one(const GrayImage& image, const BBox& box,
                                      std::span<const PointPrompt> points) const {
  SegmentRequest request;
  request.image_png = encode_gray8_png(image);
  request.boxes = {box};
  request.points.assign(points.begin(), points.end());
  return std::move(segment_masks(request).front());
}

bool RemoteSegmenter::healthy() const {
  auto client = pool_->borrow();
  auto res = client->Get(pool_->health_path);
  if (!res || res->status != 200) return false;
  try {
    const json j = json::parse(res->body);
    return j.is_object() && j.value("status", "") == "ok";
  } catch (const json::exception&) {
    return false;
  }
}

SegmentResponse remote_segment(const std::string& endpoint_url, const SegmentRequest& request,
                               std::chrono::milliseconds timeout, int retries) {
  RemoteOptions options;
  options.timeout = timeout;
  options.retries = retries;
  options.pool_size = 1;
  return RemoteSegmenter(endpoint_url, options).segment(request);
}

}  // namespace uncerseg
