#include "putty/interaction/gesture.hpp"

#include <algorithm>
#include <cmath>

namespace putty {

void select_particles(const ParticleSet& particles, const Vec3& center, Real radius, std::vector<std::uint32_t>& indices,
                      std::vector<Real>& weights) {
  indices.clear();
  weights.clear();
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const Real s = (particles.x[p] - center).norm() / radius;
    if (s >= 1) continue;
    indices.push_back(static_cast<std::uint32_t>(p));
    weights.push_back(falloff_kernel(s));
  }
}

void GestureState::apply(const InputEvent& event, const ParticleSet& particles) {
  if (const auto* p = std::get_if<PinchStart>(&event)) {
    PinchSelection sel;
    sel.start = sel.current = p->position;
    sel.radius = p->radius;
    sel.force_ratio = p->force_ratio;
    select_particles(particles, p->position, p->radius, sel.indices, sel.weights);
    hands_[static_cast<int>(p->hand)] = std::move(sel);
    previous_axis_.reset();
  } else if (const auto* m = std::get_if<PinchMove>(&event)) {
    auto& sel = hands_[static_cast<int>(m->hand)];
    if (!sel) throw GestureError(std::string("pinch_move without an active selection on the ") + hand_name(m->hand) + " hand");
    sel->current = m->position;
  } else if (const auto* e = std::get_if<PinchEnd>(&event)) {
    auto& sel = hands_[static_cast<int>(e->hand)];
    if (!sel) throw GestureError(std::string("pinch_end without an active selection on the ") + hand_name(e->hand) + " hand");
    sel.reset();
    previous_axis_.reset();
  }
}

void GestureState::clear() {
  hands_[0].reset();
  hands_[1].reset();
  previous_axis_.reset();
}

ForceField GestureState::field(const ParticleSet& particles, Real frame_dt) {
  ForceField f;
  if (!active()) return f;
  f.forces.assign(particles.size(), Vec3::Zero());
  const auto valid = [&](std::uint32_t p) { return p < particles.size(); };

  if (hands_[0] && hands_[1]) {
    const auto& a = *hands_[0];
    const auto& b = *hands_[1];
    const Vec3 axis_vec = b.current - a.current;
    const Real len = axis_vec.norm();
    if (!(len > 0)) return f;
    const Vec3 axis = axis_vec / len;
    Vec3 omega = Vec3::Zero();
    if (previous_axis_) {
      const Vec3 c = previous_axis_->cross(axis);
      const Real angle = std::atan2(c.norm(), previous_axis_->dot(axis));
      if (c.norm() > 0 && frame_dt > 0) omega = c.normalized() * (angle / frame_dt);
    }
    previous_axis_ = axis;
    // combined selection: strongest weight from either hand
    std::vector<std::pair<std::uint32_t, Real>> sel;
    for (const auto* h : {&a, &b})
      for (std::size_t i = 0; i < h->indices.size(); ++i) sel.emplace_back(h->indices[i], h->weights[i] * h->force_ratio);
    std::sort(sel.begin(), sel.end());
    f.center = (a.current + b.current) / 2;
    f.radius = std::max(a.radius, b.radius);
    for (std::size_t i = 0; i < sel.size();) {
      std::size_t j = i;
      Real w = 0;
      for (; j < sel.size() && sel[j].first == sel[i].first; ++j) w = std::max(w, sel[j].second);
      const auto p = sel[i].first;
      if (valid(p)) {
        const Vec3 rel = particles.x[p] - a.current;
        const Vec3 foot = a.current + rel.dot(axis) * axis;
        f.forces[p] = w * omega.cross(particles.x[p] - foot);
        f.selected.push_back(p);
      }
      i = j;
    }
    return f;
  }

  const auto& sel = hands_[0] ? *hands_[0] : *hands_[1];
  const Vec3 pull = sel.current - sel.start;
  f.center = sel.start;
  f.radius = sel.radius;
  for (std::size_t i = 0; i < sel.indices.size(); ++i) {
    const auto p = sel.indices[i];
    if (!valid(p)) continue;
    f.forces[p] = sel.force_ratio * sel.weights[i] * pull;
    f.selected.push_back(p);
  }
  return f;
}

}  // namespace putty
