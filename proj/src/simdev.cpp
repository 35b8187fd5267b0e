#include "tbag/simdev.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tbag {

void FollowerSimConfig::validate() const {
  if (!(tracking_bandwidth > 0.0)) throw std::invalid_argument("tracking_bandwidth must be > 0");
  if (!(control_rate > 0.0)) throw std::invalid_argument("control_rate must be > 0");
  if (tracking_bandwidth > control_rate) {
    throw std::invalid_argument("tracking_bandwidth must not exceed control_rate (overshoot)");
  }
  for (double v : max_joint_velocity) {
    if (!(v > 0.0)) throw std::invalid_argument("max_joint_velocity must be > 0");
  }
  if (!(max_gripper_velocity > 0.0)) throw std::invalid_argument("max_gripper_velocity must be > 0");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
}

ArmJointState follower_step(const FollowerSimConfig& cfg, const ArmModel& model,
                            const JointVector& state, const JointVector& cmd, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("follower_step: dt must be > 0");
  ArmJointState out;
  JointVector next;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    const double vmax = cfg.max_joint_velocity[i];
    const double rate = std::clamp(cfg.tracking_bandwidth * (cmd.angles[i] - state.angles[i]), -vmax, vmax);
    next.angles[i] = state.angles[i] + rate * dt;
  }
  const double grate = std::clamp(cfg.tracking_bandwidth * (cmd.gripper - state.gripper),
                                  -cfg.max_gripper_velocity, cfg.max_gripper_velocity);
  next.gripper = state.gripper + grate * dt;
  next = clamp_to_limits(model, next);

  out.position = next.angles;
  out.gripper = next.gripper;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    out.velocity[i] = (next.angles[i] - state.angles[i]) / dt;
    out.effort[i] = cfg.effort_gain * (cmd.angles[i] - next.angles[i]);
  }
  return out;
}

FollowerDevice::FollowerDevice(Bus& bus, const ArmPair<ArmModel>& models, FollowerSimConfig cfg,
                               const JointPair& initial, std::uint64_t seed)
    : models_(models),
      cfg_(cfg),
      commands_(bus.subscribe(topics::kFollowerJointCommands, 64)),
      states_(bus, topics::kFollowerJointStates),
      state_(initial),
      target_(initial),
      rng_(seed) {
  cfg_.validate();
}

void FollowerDevice::tick(Stamp now) {
  for (auto& msg : commands_.drain()) {
    if (const auto* cmd = std::get_if<JointCommandMsg>(&msg.payload); cmd && cmd->arms.size() == 2) {
      target_ = {cmd->arms[0], cmd->arms[1]};
    }
  }
  const double dt = 1.0 / cfg_.control_rate;
  JointStateMsg msg;
  std::normal_distribution<double> noise(0.0, cfg_.noise_std);
  for (std::size_t arm = 0; arm < 2; ++arm) {
    auto obs = follower_step(cfg_, models_[arm], state_[arm], target_[arm], dt);
    state_[arm] = obs.joints();
    if (cfg_.noise_std > 0.0) {
      JointVector noisy = obs.joints();
      for (double& a : noisy.angles) a += noise(rng_);
      noisy = clamp_to_limits(models_[arm], noisy);
      obs.position = noisy.angles;
    }
    msg.arms.push_back(obs);
  }
  states_.publish(std::move(msg), now);
}

void LeaderScript::validate() const {
  for (std::size_t arm = 0; arm < 2; ++arm) {
    const auto& w = arms[arm];
    if (w.empty()) throw std::invalid_argument("leader script: each arm needs at least one waypoint");
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!w[i].q.finite()) throw std::invalid_argument("leader script: non-finite waypoint");
      if (i > 0 && !(w[i].time > w[i - 1].time)) {
        throw std::invalid_argument("leader script: waypoint times must be strictly increasing");
      }
    }
  }
}

double LeaderScript::duration() const {
  return std::max(arms.left.back().time, arms.right.back().time);
}

JointVector interpolate(const std::vector<Waypoint>& w, double t) {
  if (t <= w.front().time) return w.front().q;
  if (t >= w.back().time) return w.back().q;
  auto hi = std::upper_bound(w.begin(), w.end(), t,
                             [](double v, const Waypoint& p) { return v < p.time; });
  auto lo = std::prev(hi);
  const double u = (t - lo->time) / (hi->time - lo->time);
  JointVector out;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    out.angles[i] = lo->q.angles[i] + u * (hi->q.angles[i] - lo->q.angles[i]);
  }
  out.gripper = lo->q.gripper + u * (hi->q.gripper - lo->q.gripper);
  return out;
}

JointPair LeaderScript::sample(double t) const {
  if (loop) {
    const double d = duration();
    if (d > 0.0 && t > d) t = std::fmod(t, d);
  }
  return {interpolate(arms.left, t), interpolate(arms.right, t)};
}

LeaderScript LeaderScript::from_json_text(const std::string& text) {
  LeaderScript s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.loop = j.value("loop", false);
    for (std::size_t arm = 0; arm < 2; ++arm) {
      const char* key = arm == 0 ? "left" : "right";
      for (const auto& wp : j.at(key)) {
        Waypoint w;
        w.time = wp.at("t").get<double>();
        const auto angles = wp.at("angles").get<std::vector<double>>();
        if (angles.size() != kArmJoints) {
          throw std::invalid_argument(std::string("leader script: ") + key + " waypoint needs 7 angles");
        }
        std::copy(angles.begin(), angles.end(), w.q.angles.begin());
        w.q.gripper = wp.at("gripper").get<double>();
        s.arms[arm].push_back(w);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("leader script: ") + e.what());
  }
  s.validate();
  return s;
}

LeaderScript LeaderScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open leader script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string LeaderScript::to_json_text() const {
  nlohmann::json j;
  j["loop"] = loop;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    auto& list = j[arm == 0 ? "left" : "right"];
    list = nlohmann::json::array();
    for (const auto& w : arms[arm]) {
      list.push_back({{"t", w.time}, {"angles", w.q.angles}, {"gripper", w.q.gripper}});
    }
  }
  return j.dump(1);
}

LeaderDevice::LeaderDevice(Bus& bus, Mode mode)
    : mode_(mode),
      bus_(&bus),
      pub_(bus, topics::kLeaderJointStates),
      setpoint_mu_(std::make_unique<std::mutex>()) {}

LeaderDevice LeaderDevice::scripted(Bus& bus, LeaderScript script, Stamp script_start) {
  script.validate();
  LeaderDevice d(bus, Mode::Script);
  d.script_ = std::move(script);
  d.script_start_ = script_start;
  return d;
}

LeaderDevice LeaderDevice::external(Bus& bus, const JointPair& initial) {
  LeaderDevice d(bus, Mode::External);
  d.setpoint_ = initial;
  return d;
}

LeaderDevice LeaderDevice::from_log(Bus& bus, std::vector<BusMessage> log) {
  LeaderDevice d(bus, Mode::Log);
  std::stable_sort(log.begin(), log.end(),
                   [](const BusMessage& a, const BusMessage& b) { return a.stamp < b.stamp; });
  d.log_ = std::move(log);
  return d;
}

void LeaderDevice::set_setpoint(std::size_t arm, const JointVector& q) {
  if (mode_ != Mode::External) throw std::logic_error("leader is not in UI-driven mode");
  std::lock_guard lock(*setpoint_mu_);
  setpoint_[arm] = q;
}

bool LeaderDevice::exhausted(Stamp now) const {
  switch (mode_) {
    case Mode::Script:
      return !script_.loop &&
             static_cast<double>(now - std::min(now, script_start_)) / 1e9 > script_.duration();
    case Mode::External: return false;
    case Mode::Log: return log_pos_ >= log_.size();
  }
  return true;
}

void LeaderDevice::tick(Stamp now) {
  if (mode_ == Mode::Log) {
    while (log_pos_ < log_.size() && log_[log_pos_].stamp <= now) bus_->publish(log_[log_pos_++]);
    return;
  }
  JointPair q;
  if (mode_ == Mode::Script) {
    const double t = now >= script_start_ ? static_cast<double>(now - script_start_) / 1e9 : 0.0;
    q = script_.sample(t);
  } else {
    std::lock_guard lock(*setpoint_mu_);
    q = setpoint_;
  }
  JointStateMsg msg;
  const double dt = last_ && now > last_stamp_ ? static_cast<double>(now - last_stamp_) / 1e9 : 0.0;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    ArmJointState s;
    s.position = q[arm].angles;
    s.gripper = q[arm].gripper;
    if (dt > 0.0) {
      for (std::size_t i = 0; i < kArmJoints; ++i) {
        s.velocity[i] = (q[arm].angles[i] - (*last_)[arm].angles[i]) / dt;
      }
    }
    msg.arms.push_back(s);
  }
  last_ = q;
  last_stamp_ = now;
  pub_.publish(std::move(msg), now);
}

std::vector<std::uint8_t> test_pattern(std::uint8_t camera_id, std::uint64_t frame_index,
                                       std::uint16_t width, std::uint16_t height) {
  std::vector<std::uint8_t> px(std::size_t{width} * height * 3);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      auto* p = &px[(y * width + x) * 3];
      p[0] = static_cast<std::uint8_t>(x + frame_index);
      p[1] = static_cast<std::uint8_t>(2 * y + 80u * camera_id);
      p[2] = static_cast<std::uint8_t>(60u * camera_id);
    }
  }
  // Header pixels: marker, then the frame index one byte per pixel with its
  // complement for self-checking.
  if (px.size() >= 9 * 3) {
    px[0] = 0xA5;
    px[1] = camera_id;
    px[2] = 0x5A;
    for (std::size_t b = 0; b < 8; ++b) {
      const auto byte = static_cast<std::uint8_t>(frame_index >> (8 * b));
      px[(1 + b) * 3 + 0] = byte;
      px[(1 + b) * 3 + 1] = static_cast<std::uint8_t>(~byte);
      px[(1 + b) * 3 + 2] = static_cast<std::uint8_t>(b);
    }
  }
  return px;
}

std::optional<PatternId> decode_test_pattern(const CameraFrame& frame) {
  const auto& px = frame.pixels;
  if (px.size() < 9 * 3 || px[0] != 0xA5 || px[2] != 0x5A) return std::nullopt;
  std::uint64_t index = 0;
  for (std::size_t b = 0; b < 8; ++b) {
    const auto byte = px[(1 + b) * 3 + 0];
    if (px[(1 + b) * 3 + 1] != static_cast<std::uint8_t>(~byte) || px[(1 + b) * 3 + 2] != b) {
      return std::nullopt;
    }
    index |= std::uint64_t{byte} << (8 * b);
  }
  return PatternId{px[1], index};
}

CameraDevice::CameraDevice(Bus& bus, std::uint8_t camera_id, std::uint16_t width,
                           std::uint16_t height)
    : camera_id_(camera_id),
      width_(width),
      height_(height),
      pub_(bus, topics::camera_frame(camera_id)) {}

void CameraDevice::tick(Stamp now) {
  CameraFrame f;
  f.camera_id = camera_id_;
  f.frame_index = next_index_++;
  f.width = width_;
  f.height = height_;
  f.pixels = test_pattern(camera_id_, f.frame_index, width_, height_);
  pub_.publish(std::move(f), now);
}

}  // namespace tbag
