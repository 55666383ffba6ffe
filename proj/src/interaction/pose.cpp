#include "putty/interaction/pose.hpp"

#include <cmath>

namespace putty {

void PoseHistory::push(Real time, JointMap joints) {
  if (!samples_.empty() && !(time > samples_.back().first))
    throw ValidationError("pose.time", "samples must arrive in strictly increasing time");
  samples_.emplace_back(time, std::move(joints));
  // keep one sample older than the window to anchor the first duration
  while (samples_.size() > 2 && samples_[1].first < time - window_) samples_.pop_front();
}

JointMap smooth_pose(const PoseHistory& history, Real now) {
  const auto& s = history.samples();
  if (s.empty()) return {};
  // samples in [now - window, now]; hold the newest past sample if none
  std::size_t last = s.size();
  while (last > 0 && s[last - 1].first > now) --last;
  if (last == 0) return s.front().second;
  std::size_t first = last - 1;
  while (first > 0 && s[first - 1].first >= now - history.window()) --first;
  if (last - first == 1) return s[first].second;

  std::vector<Real> weight(last - first);
  for (std::size_t i = first; i < last; ++i) {
    const std::size_t prev = i > 0 ? i - 1 : i + 1;  // oldest sample borrows its successor's duration
    weight[i - first] = std::abs(s[i].first - s[prev].first);
  }

  JointMap out = s[last - 1].second;
  for (auto& [name, joint] : out) {
    Real S0 = 0, S1 = 0, S2 = 0;
    Vec3 X0 = Vec3::Zero(), X1 = Vec3::Zero();
    for (std::size_t i = first; i < last; ++i) {
      const auto it = s[i].second.find(name);
      if (it == s[i].second.end()) continue;
      const Real w = weight[i - first];
      const Real tau = s[i].first - now;
      S0 += w;
      S1 += w * tau;
      S2 += w * tau * tau;
      X0 += w * it->second.position;
      X1 += w * tau * it->second.position;
    }
    const Real det = S0 * S2 - S1 * S1;
    if (S0 <= 0) continue;
    // intercept of the weighted line fit x(tau) = a + b tau at tau = 0
    if (det > 1e-12 * S0 * S2) joint.position = (S2 * X0 - S1 * X1) / det;
    else joint.position = X0 / S0;
  }
  return out;
}

MedialRig pose_rig(const RigTemplate& rig, const JointMap& joints, const MedialRig* previous, Real frame_dt) {
  MedialRig out;
  out.name = rig.name;
  out.lone_spheres = rig.lone_spheres;
  out.cones = rig.cones;
  out.slabs = rig.slabs;
  out.spheres.reserve(rig.spheres.size());
  auto find = [&](const std::string& name) -> const Joint& {
    const auto it = joints.find(name);
    if (it == joints.end()) throw ValidationError("joints", "rig '" + rig.name + "' needs missing joint '" + name + "'");
    return it->second;
  };
  const bool with_velocity = previous && previous->spheres.size() == rig.spheres.size() && frame_dt > 0;
  for (std::size_t i = 0; i < rig.spheres.size(); ++i) {
    const auto& b = rig.spheres[i];
    const Joint& a = find(b.joint_a);
    const Joint& c = find(b.joint_b);
    MedialSphere<Real> s;
    s.center = (1 - b.blend) * a.position + b.blend * c.position + a.orientation * b.offset;
    s.radius = b.radius;
    if (with_velocity) s.velocity = (s.center - previous->spheres[i].center) / frame_dt;
    out.spheres.push_back(s);
  }
  return out;
}

MedialRig interpolate_rig(const MedialRig& from, const MedialRig& to, Real s) {
  MedialRig out = to;
  if (from.spheres.size() != to.spheres.size()) return out;
  for (std::size_t i = 0; i < out.spheres.size(); ++i)
    out.spheres[i].center = (1 - s) * from.spheres[i].center + s * to.spheres[i].center;
  return out;
}

}  // namespace putty
