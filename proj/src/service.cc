#include "mpgrasp/service.h"

#include <chrono>
#include <deque>
#include <iostream>
#include <set>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "mpgrasp/error.h"

namespace mpgrasp {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace ws = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

Json error_reply(const std::string& reason) {
  return {{"type", "error"}, {"reason", reason}};
}

Vec3 read_vec3(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
    throw Error(ErrorCode::kInvalidArgument, std::string(key) + " must be a 3-array");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[key][i].is_number()) {
      throw Error(ErrorCode::kInvalidArgument, std::string(key) + " must hold numbers");
    }
    v(i) = j[key][i].get<double>();
  }
  return v;
}

Json vec_json(const VecX& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

ServiceCore::ServiceCore(Config config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  config_.task.auto_prompt = false;
  reset();
}

void ServiceCore::reset() {
  RunOptions opt;
  opt.clock = ClockMode::kRealtime;
  opt.seed = seed_;
  opt.duration = 1e9;
  opt.control_log_stride = 0;
  opt.log_sensor = false;
  runtime_ = std::make_unique<Runtime>(config_, opt);
  drained_ = 0;
}

std::vector<Json> ServiceCore::handle(const std::string& text) {
  Json msg;
  try {
    msg = Json::parse(text);
  } catch (const Json::exception&) {
    return {error_reply("malformed JSON")};
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    return {error_reply("message needs a string 'type'")};
  }
  const std::string type = msg["type"].get<std::string>();
  try {
    if (type == "prompt") {
      if (!msg.contains("text") || !msg["text"].is_string()) {
        return {error_reply("prompt needs 'text'")};
      }
      runtime_->prompt(msg["text"].get<std::string>());
    } else if (type == "set_object_pose") {
      if (!msg.contains("id") || !msg["id"].is_string()) {
        return {error_reply("set_object_pose needs 'id'")};
      }
      const Pose pose = Pose::from_xyz_rpy(read_vec3(msg, "p"), read_vec3(msg, "o"));
      runtime_->set_object_pose(msg["id"].get<std::string>(), pose);
    } else if (type == "pause") {
      paused_ = true;
      pending_.push_back({{"type", "event"}, {"name", "paused"}, {"t", runtime_->time()}});
    } else if (type == "resume") {
      paused_ = false;
      pending_.push_back({{"type", "event"}, {"name", "resumed"}, {"t", runtime_->time()}});
    } else if (type == "reset") {
      reset();
      pending_.push_back({{"type", "event"}, {"name", "reset"}, {"t", 0.0}});
    } else {
      return {error_reply("unknown type '" + type + "'")};
    }
  } catch (const Error& e) {
    return {error_reply(e.what())};
  }
  return {};
}

void ServiceCore::advance(double seconds) {
  if (paused_ || runtime_->failed()) return;
  runtime_->run_until(runtime_->time() + seconds);
}

Json ServiceCore::scene_state() const {
  const SceneSnapshot s = runtime_->snapshot();
  Json j;
  j["type"] = "scene_state";
  j["t"] = s.t;
  j["robot_q"] = vec_json(s.robot_q);
  Json objects = Json::object();
  for (const auto& o : s.objects) objects[o.id] = pose_json(o.pose);
  j["object_poses"] = std::move(objects);
  j["phase"] = to_string(s.phase);
  Json knots = Json::array();
  for (const auto& k : s.plan_knots) knots.push_back(vec_json(k));
  j["plan_knots"] = std::move(knots);
  j["target"] = s.target ? Json(*s.target) : Json();
  j["paused"] = paused_;
  return j;
}

std::vector<Json> ServiceCore::drain_events() {
  std::vector<Json> out = std::move(pending_);
  pending_.clear();
  const auto& records = runtime_->log().records();
  for (; drained_ < records.size(); ++drained_) {
    const LogRecord& r = records[drained_];
    if (r.type != "event") continue;
    Json j = r.data;
    j["type"] = "event";
    j["t"] = r.t;
    out.push_back(std::move(j));
  }
  return out;
}

// --- socket layer -----------------------------------------------------------

struct Service::Impl {
  class Session;

  Impl(Config config, ServiceOptions opt)
      : options(std::move(opt)),
        core(std::move(config), options.seed),
        acceptor(io),
        step_timer(io) {}

  void accept();
  void schedule_step();
  void broadcast(const Json& msg);

  ServiceOptions options;
  ServiceCore core;
  asio::io_context io;
  tcp::acceptor acceptor;
  asio::steady_timer step_timer;
  std::set<std::shared_ptr<Session>> sessions;
  double since_state = 0.0;
};

class Service::Impl::Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Impl& owner) : ws_(std::move(socket)), owner_(owner) {}

  void start() {
    ws_.text(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->owner_.sessions.insert(self);
      self->send(self->owner_.core.scene_state());
      self->read();
    });
  }

  void send(const Json& msg) {
    queue_.push_back(msg.dump());
    if (queue_.size() == 1) write();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->owner_.sessions.erase(self);
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      for (const Json& reply : self->owner_.core.handle(text)) self->send(reply);
      for (const Json& ev : self->owner_.core.drain_events()) self->owner_.broadcast(ev);
      self->read();
    });
  }

  void write() {
    ws_.async_write(asio::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->owner_.sessions.erase(self);
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write();
                    });
  }

  ws::stream<tcp::socket> ws_;
  Impl& owner_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
};

void Service::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<Session>(std::move(socket), *this)->start();
    accept();
  });
}

void Service::Impl::broadcast(const Json& msg) {
  for (const auto& s : sessions) s->send(msg);
}

void Service::Impl::schedule_step() {
  step_timer.expires_after(std::chrono::duration_cast<asio::steady_timer::duration>(
      std::chrono::duration<double>(options.step_period)));
  step_timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    core.advance(options.step_period);
    for (const Json& ev : core.drain_events()) broadcast(ev);
    since_state += options.step_period;
    if (since_state + 1e-9 >= 1.0 / options.state_rate) {
      since_state = 0.0;
      broadcast(core.scene_state());
    }
    schedule_step();
  });
}

Service::Service(Config config, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(options))) {}

Service::~Service() = default;

unsigned short Service::open() {
  const tcp::endpoint ep(asio::ip::make_address(impl_->options.address),
                         impl_->options.port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  return impl_->acceptor.local_endpoint().port();
}

void Service::run() {
  if (!impl_->acceptor.is_open()) open();
  impl_->accept();
  impl_->schedule_step();
  impl_->io.run();
}

void Service::stop() {
  asio::post(impl_->io, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    impl_->step_timer.cancel();
    impl_->io.stop();
  });
}

}  // namespace mpgrasp
