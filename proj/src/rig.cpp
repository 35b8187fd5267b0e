#include "tbag/rig.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

namespace tbag {

namespace {

#include "default_rig_text.inc"

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

// Walks a YAML mapping, tracking which keys were consumed so leftovers can
// be reported as unknown.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.IsMap()) throw RigError(line_of(node_), path_, "expected a mapping");
  }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  YAML::Node get(const std::string& key) {
    seen_.insert(key);
    const YAML::Node n = node_[key];
    if (!n) throw RigError(line_of(node_), join(key), "missing required key");
    return n;
  }

  std::optional<YAML::Node> find(const std::string& key) {
    seen_.insert(key);
    const YAML::Node n = node_[key];
    if (!n) return std::nullopt;
    return n;
  }

  Section sub(const std::string& key) { return Section(get(key), join(key)); }

  template <typename T>
  T value(const std::string& key) {
    return as<T>(get(key), join(key));
  }

  template <typename T>
  T value_or(const std::string& key, T fallback) {
    auto n = find(key);
    return n ? as<T>(*n, join(key)) : fallback;
  }

  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.contains(key)) throw RigError(line_of(kv.first), join(key), "unknown key");
    }
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  // Re-throws a semantic check failure anchored at this section.
  template <typename F>
  void check(F&& f) const {
    try {
      f();
    } catch (const std::invalid_argument& e) {
      throw RigError(line_of(node_), path_, e.what());
    }
  }

  template <typename T>
  static T as(const YAML::Node& n, const std::string& path) {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw RigError(line_of(n), path, "wrong type");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <std::size_t N>
std::array<double, N> fixed_list(const YAML::Node& n, const std::string& path) {
  auto v = Section::as<std::vector<double>>(n, path);
  if (v.size() != N) {
    throw RigError(line_of(n), path, "expected " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

Vec3 vec3(const YAML::Node& n, const std::string& path) {
  const auto a = fixed_list<3>(n, path);
  return {a[0], a[1], a[2]};
}

Quat quat(const YAML::Node& n, const std::string& path) {
  const auto a = fixed_list<4>(n, path);
  const Quat q(a[0], a[1], a[2], a[3]);
  if (std::abs(q.norm() - 1.0) > 1e-6) throw RigError(line_of(n), path, "rotation must be a unit quaternion");
  return q.normalized();
}

RigidTransform transform(Section s) {
  RigidTransform t;
  t.translation = vec3(s.get("translation"), s.join("translation"));
  if (auto r = s.find("rotation")) t.rotation = quat(*r, s.join("rotation"));
  s.finish();
  return t;
}

JointVector joint_vector(Section s) {
  JointVector q;
  q.angles = fixed_list<kArmJoints>(s.get("angles"), s.join("angles"));
  q.gripper = s.value<double>("gripper");
  s.finish();
  return q;
}

std::vector<Capsule> capsules(const YAML::Node& list, const std::string& path) {
  if (!list.IsSequence()) throw RigError(line_of(list), path, "expected a list");
  std::vector<Capsule> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    Section c(list[i], path + "[" + std::to_string(i) + "]");
    Capsule cap;
    cap.link = c.value<int>("link");
    cap.a = vec3(c.get("a"), c.join("a"));
    cap.b = vec3(c.get("b"), c.join("b"));
    cap.radius = c.value<double>("radius");
    c.finish();
    out.push_back(cap);
  }
  return out;
}

ArmPair<ArmModel> follower_models(Section s) {
  const auto kind = s.value<std::string>("model");
  const auto left_base = transform(s.sub("left_base"));
  const auto right_base = transform(s.sub("right_base"));
  ArmModel proto = default_follower_model("follower", RigidTransform{});
  if (kind == "custom") {
    const auto links = s.get("links");
    if (!links.IsSequence() || links.size() != kArmJoints) {
      throw RigError(line_of(links), s.join("links"), "expected 7 links");
    }
    for (std::size_t i = 0; i < kArmJoints; ++i) {
      Section l(links[i], s.join("links") + "[" + std::to_string(i) + "]");
      proto.links[i].fixed.translation = vec3(l.get("translation"), l.join("translation"));
      if (auto r = l.find("rotation")) proto.links[i].fixed.rotation = quat(*r, l.join("rotation"));
      proto.links[i].axis = vec3(l.get("axis"), l.join("axis"));
      l.finish();
    }
  } else if (kind != "default") {
    throw RigError(line_of(s.get("model")), s.join("model"), "expected 'default' or 'custom'");
  }
  if (auto lim = s.find("joint_limits")) {
    if (!lim->IsSequence() || lim->size() != kArmJoints) {
      throw RigError(line_of(*lim), s.join("joint_limits"), "expected 7 [lower, upper] pairs");
    }
    for (std::size_t i = 0; i < kArmJoints; ++i) {
      const auto p = fixed_list<2>((*lim)[i], s.join("joint_limits"));
      proto.joint_limits[i] = {p[0], p[1]};
    }
  }
  if (auto g = s.find("gripper_limits")) {
    const auto p = fixed_list<2>(*g, s.join("gripper_limits"));
    proto.gripper_limits = {p[0], p[1]};
  }
  if (auto c = s.find("capsules")) proto.collision_capsules = capsules(*c, s.join("capsules"));
  s.finish();

  ArmPair<ArmModel> out{proto, proto};
  out.left.name = "follower_left";
  out.left.base_pose = left_base;
  out.right.name = "follower_right";
  out.right.base_pose = right_base;
  return out;
}

}  // namespace

RigError::RigError(int line, const std::string& key, const std::string& message)
    : std::runtime_error("rig line " + std::to_string(line) + ": " + key + ": " + message),
      line_(line),
      key_(key) {}

void Rig::validate() const {
  followers.left.validate();
  followers.right.validate();
  leaders.left.validate();
  leaders.right.validate();
  if (!(leader_scale > 0.0 && leader_scale <= 1.0)) {
    throw std::invalid_argument("leader.scale must be in (0, 1]");
  }
  for (const auto& c : body) {
    if (!(c.radius > 0.0)) throw std::invalid_argument("body capsule radius must be > 0");
  }
  retarget.validate();
  gesture.validate();
  safety.validate();
  follower_sim.validate();
  if (cameras.count != 3) throw std::invalid_argument("cameras.count must be 3");
  if (!(cameras.rate_hz > 0.0) || cameras.width < 3 || cameras.height < 3) {
    throw std::invalid_argument("cameras need a positive rate and at least 3x3 pixels");
  }
  if (!(teleop_rate >= 50.0)) throw std::invalid_argument("rates.teleop_hz must be >= 50");
  if (!(leader_rate > 0.0)) throw std::invalid_argument("rates.leader_hz must be > 0");
  if (!(leader_timeout > 0.0)) throw std::invalid_argument("rates.leader_timeout must be > 0");
  for (std::size_t arm = 0; arm < 2; ++arm) {
    if (!within_limits(followers[arm], ready_pose[arm])) {
      throw std::invalid_argument("ready_pose is outside the follower joint limits");
    }
  }
  const auto report = check_self_collision(collision_rig(), ready_pose.left, ready_pose.right,
                                           safety.margin);
  if (report.colliding) throw std::invalid_argument("ready_pose is not collision-free");
}

std::string default_rig_text() { return kDefaultRigText; }

Rig default_rig() { return parse_rig(default_rig_text()); }

Rig parse_rig(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw RigError(e.mark.line + 1, "<syntax>", e.msg);
  }
  if (!root || root.IsNull()) throw RigError(1, "<root>", "empty rig description");

  Rig rig;
  Section top(root, "");
  rig.name = top.value_or<std::string>("name", rig.name);
  rig.followers = follower_models(top.sub("follower"));

  {
    auto s = top.sub("leader");
    rig.leader_scale = s.value<double>("scale");
    const auto lb = transform(s.sub("left_base"));
    const auto rb = transform(s.sub("right_base"));
    s.finish();
    rig.leaders.left = scaled_model(rig.followers.left, rig.leader_scale, "leader_left", lb);
    rig.leaders.right = scaled_model(rig.followers.right, rig.leader_scale, "leader_right", rb);
  }

  if (auto body = top.find("body_capsules")) {
    if (!body->IsSequence()) throw RigError(line_of(*body), "body_capsules", "expected a list");
    for (std::size_t i = 0; i < body->size(); ++i) {
      Section c((*body)[i], "body_capsules[" + std::to_string(i) + "]");
      WorldCapsule w;
      w.a = vec3(c.get("a"), c.join("a"));
      w.b = vec3(c.get("b"), c.join("b"));
      w.radius = c.value<double>("radius");
      w.owner = kBodyOwner;
      c.finish();
      rig.body.push_back(w);
    }
  }

  {
    auto s = top.sub("ready_pose");
    rig.ready_pose.left = joint_vector(s.sub("left"));
    rig.ready_pose.right = joint_vector(s.sub("right"));
    s.finish();
  }

  if (top.has("retarget")) {
    auto s = top.sub("retarget");
    if (auto n = s.find("sign")) rig.retarget.sign = fixed_list<kArmJoints>(*n, s.join("sign"));
    if (auto n = s.find("offset")) rig.retarget.offset = fixed_list<kArmJoints>(*n, s.join("offset"));
    rig.retarget.gripper_gain = s.value_or("gripper_gain", rig.retarget.gripper_gain);
    rig.retarget.gripper_bias = s.value_or("gripper_bias", rig.retarget.gripper_bias);
    rig.retarget.smoothing_alpha = s.value_or("smoothing_alpha", rig.retarget.smoothing_alpha);
    s.finish();
    s.check([&] { rig.retarget.validate(); });
  }

  {
    auto s = top.sub("gesture");
    auto& g = rig.gesture;
    g.grasp_threshold = s.value_or("grasp_threshold", g.grasp_threshold);
    g.hold_duration = s.value_or("hold_duration", g.hold_duration);
    g.transit_duration = s.value_or("transit_duration", g.transit_duration);
    g.ready_tolerance = s.value_or("ready_tolerance", g.ready_tolerance);
    auto z = s.sub("end_zone");
    if (z.has("center")) {
      const Vec3 c = vec3(z.get("center"), z.join("center"));
      g.end_zone = Box::cube(c, z.value<double>("edge"));
    } else {
      g.end_zone = {vec3(z.get("min"), z.join("min")), vec3(z.get("max"), z.join("max"))};
    }
    z.finish();
    z.check([&] {
      if (g.end_zone.degenerate()) throw std::invalid_argument("end_zone must be non-degenerate");
    });
    s.finish();
    s.check([&] { g.validate(); });
  }

  if (top.has("safety")) {
    auto s = top.sub("safety");
    rig.safety.margin = s.value_or("margin", rig.safety.margin);
    rig.safety.deadband = s.value_or("deadband", rig.safety.deadband);
    rig.safety.saturation = s.value_or("saturation", rig.safety.saturation);
    s.finish();
    s.check([&] { rig.safety.validate(); });
  }

  if (top.has("follower_sim")) {
    auto s = top.sub("follower_sim");
    auto& f = rig.follower_sim;
    f.tracking_bandwidth = s.value_or("tracking_bandwidth", f.tracking_bandwidth);
    if (auto v = s.find("max_joint_velocity")) {
      if (v->IsSequence()) {
        f.max_joint_velocity = fixed_list<kArmJoints>(*v, s.join("max_joint_velocity"));
      } else {
        f.max_joint_velocity.fill(Section::as<double>(*v, s.join("max_joint_velocity")));
      }
    }
    f.max_gripper_velocity = s.value_or("max_gripper_velocity", f.max_gripper_velocity);
    f.noise_std = s.value_or("noise_std", f.noise_std);
    f.effort_gain = s.value_or("effort_gain", f.effort_gain);
    s.finish();
  }

  if (top.has("cameras")) {
    auto s = top.sub("cameras");
    rig.cameras.count = s.value_or("count", rig.cameras.count);
    rig.cameras.rate_hz = s.value_or("rate_hz", rig.cameras.rate_hz);
    rig.cameras.width = static_cast<std::uint16_t>(s.value_or<int>("width", rig.cameras.width));
    rig.cameras.height = static_cast<std::uint16_t>(s.value_or<int>("height", rig.cameras.height));
    s.finish();
    s.check([&] {
      if (rig.cameras.count != 3) throw std::invalid_argument("count must be 3");
    });
  }

  if (top.has("rates")) {
    auto s = top.sub("rates");
    rig.teleop_rate = s.value_or("teleop_hz", rig.teleop_rate);
    rig.leader_rate = s.value_or("leader_hz", rig.leader_rate);
    rig.follower_sim.control_rate = s.value_or("joint_state_hz", rig.follower_sim.control_rate);
    rig.leader_timeout = s.value_or("leader_timeout", rig.leader_timeout);
    s.finish();
    s.check([&] {
      if (!(rig.teleop_rate >= 50.0)) throw std::invalid_argument("teleop_hz must be >= 50");
      if (!(rig.leader_rate > 0.0)) throw std::invalid_argument("leader_hz must be > 0");
      if (!(rig.leader_timeout > 0.0)) throw std::invalid_argument("leader_timeout must be > 0");
    });
  }

  rig.record_root = top.value_or<std::string>("record_root", rig.record_root);
  top.finish();

  try {
    rig.validate();
  } catch (const std::invalid_argument& e) {
    throw RigError(1, "<rig>", e.what());
  }
  rig.hash = sha256_hex(text);
  return rig;
}

Rig load_rig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open rig file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rig(ss.str());
}

std::string sha256_hex(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace tbag
