#include "putty/interaction/simulation.hpp"

#include <chrono>

#include "putty/appearance/splats.hpp"
#include "putty/interaction/edit.hpp"

namespace putty {

using nlohmann::json;

json metrics_to_json(const FrameMetrics& m) {
  return {{"frame", m.frame},         {"time", m.time},
          {"particles", m.particles}, {"active", m.active},
          {"splats", m.splats},       {"total_mass", m.total_mass},
          {"max_penetration", m.max_penetration}, {"projected", m.projected},
          {"clamped", m.clamped}};
}

json timing_to_json(const FrameTiming& t) {
  return {{"frame", t.frame},
          {"step_seconds", t.step_seconds},
          {"appearance_seconds", t.appearance_seconds},
          {"p2g", t.phases.p2g},
          {"grid", t.phases.grid},
          {"g2p", t.phases.g2p},
          {"adjust", t.phases.adjust},
          {"plasticity", t.phases.plasticity}};
}

RigTemplate load_tool(const std::string& name) {
  if (name.size() > 5 && name.ends_with(".json")) return load_rig(name);
  return make_builtin_rig(name);
}

FrameSimulator::FrameSimulator(SceneConfig config, SimState initial)
    : config_(std::move(config)), initial_(std::move(initial)), solver_(config_) {
  validate(config_);
  if (initial_.objects.empty()) initial_.rebuild_objects();
  state_ = initial_;
  tick_ = state_.frame;
  tools_[0] = load_tool(config_.left_tool);
  tools_[1] = load_tool(config_.right_tool);
}

FrameSimulator::FrameSimulator(const SceneConfig& config) : FrameSimulator(config, [&] {
  SimState s;
  s.particles = seed_particles(config);
  s.rebuild_objects();
  return s;
}()) {}

void FrameSimulator::set_tool(Hand hand, const std::string& tool) {
  const int h = static_cast<int>(hand);
  tools_[h] = load_tool(tool);
  rigs_[h].reset();
}

void FrameSimulator::push_pose(Hand hand, Real time, JointMap joints) {
  histories_[static_cast<int>(hand)].push(time, std::move(joints));
}

void FrameSimulator::push_sample(const TrajectorySample& sample) {
  for (int h = 0; h < 2; ++h)
    if (sample.hands[h]) push_pose(static_cast<Hand>(h), sample.time, *sample.hands[h]);
  for (const auto& e : sample.events) pending_.push_back(e);
}

void FrameSimulator::queue_event(InputEvent event) { pending_.push_back(std::move(event)); }

void FrameSimulator::restore(SimState state) {
  state_ = std::move(state);
  gestures_.clear();
}

void FrameSimulator::apply_event(const InputEvent& e) {
  if (const auto* t = std::get_if<ToolSelect>(&e)) {
    set_tool(t->hand, t->tool);
  } else if (const auto* op = std::get_if<EditOp>(&e)) {
    apply_edit(state_, *op, initial_, config_);
    gestures_.clear();
  } else if (const auto* m = std::get_if<MaterialChange>(&e)) {
    const auto* obj = state_.find_object(m->object);
    if (!obj) throw ValidationError("material.object", "unknown object id " + std::to_string(m->object));
    validate(m->params, "material");
    if (solver_.materials().size() >= 0xffff) throw ValidationError("material", "too many material slots");
    const auto id = static_cast<std::uint16_t>(solver_.materials().size());
    solver_.materials().push_back(m->params);
    config_.materials.push_back(m->params);
    auto in = [&](std::uint32_t c) { return std::find(obj->categories.begin(), obj->categories.end(), c) != obj->categories.end(); };
    for (std::size_t i = 0; i < state_.particles.size(); ++i)
      if (in(state_.particles.category[i])) state_.particles.material[i] = id;
    for (std::size_t i = 0; i < state_.appearance.size(); ++i)
      if (in(state_.appearance.category[i])) state_.appearance.material[i] = id;
  } else {
    gestures_.apply(e, state_.particles);
  }
}

FrameMetrics FrameSimulator::step(const std::function<void(const SubstepReport&)>& on_substep) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  timing_ = FrameTiming{};
  timing_.frame = state_.frame;

  while (!pending_.empty()) {
    const InputEvent e = std::move(pending_.front());
    pending_.pop_front();
    apply_event(e);
  }

  const Real frame_dt = config_.frame_dt();
  const Real now = input_time();
  std::array<std::optional<MedialRig>, 2> from = rigs_;
  std::vector<Vec3> centroids;
  for (int h = 0; h < 2; ++h) {
    if (histories_[h].empty()) continue;
    const JointMap joints = smooth_pose(histories_[h], now);
    rigs_[h] = pose_rig(tools_[h], joints, rigs_[h] ? &*rigs_[h] : nullptr, frame_dt);
    if (!from[h]) from[h] = rigs_[h];
    centroids.push_back(rigs_[h]->centroid());
  }

  if (config_.localized.enabled && !centroids.empty())
    solver_.set_region(state_.particles, update_active_region(centroids, config_.localized.half_side, config_.domain_side));
  else
    solver_.set_full(state_.particles);
  std::vector<std::uint32_t> splat_active;
  if (!state_.appearance.empty()) splat_active = set_splat_activity(state_.appearance, solver_.node_box(), solver_.grid());

  const ForceField field = gestures_.field(state_.particles, frame_dt);

  FrameMetrics m;
  const int substeps = config_.substeps_per_frame;
  for (int s = 1; s <= substeps; ++s) {
    std::vector<MedialPrimitive> prims;
    for (int h = 0; h < 2; ++h) {
      if (!rigs_[h]) continue;
      const auto posed = interpolate_rig(*from[h], *rigs_[h], static_cast<Real>(s) / substeps);
      for (auto& p : posed.primitives()) prims.push_back(std::move(p));
    }
    const ContactWorld world(std::move(prims), config_.contact, solver_.grid().dx);
    const auto report = solver_.substep(state_.particles, &world, field.forces, &timing_.phases);
    if (!state_.appearance.empty()) {
      const auto a0 = Clock::now();
      advect_appearance(state_.appearance, solver_.grid(), config_.dt, splat_active, solver_.node_box(),
                        solver_.region().has_value(), &world, solver_.materials());
      timing_.appearance_seconds += std::chrono::duration<double>(Clock::now() - a0).count();
    }
    m.max_penetration = std::max(m.max_penetration, report.projection.max_penetration);
    m.projected += report.projection.projected;
    m.clamped += report.clamped;
    if (on_substep) on_substep(report);
  }

  ++tick_;
  ++state_.frame;
  state_.time += frame_dt;
  m.frame = state_.frame;
  m.time = state_.time;
  m.particles = state_.particles.size();
  m.active = solver_.active_indices().size();
  m.splats = state_.appearance.size();
  m.total_mass = state_.particles.total_mass();
  timing_.step_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return m;
}

std::size_t feed_samples(FrameSimulator& sim, const Trajectory& trajectory, std::size_t cursor, Real input_time) {
  // tolerance keeps samples stamped exactly on a frame tick in that frame
  const Real due = input_time + 1e-9;
  while (cursor < trajectory.samples.size() && trajectory.samples[cursor].time <= due)
    sim.push_sample(trajectory.samples[cursor++]);
  return cursor;
}

ReplayResult replay(FrameSimulator& sim, const Trajectory& trajectory, int frames,
                    const std::function<void(const FrameSimulator&, const FrameMetrics&)>& on_frame) {
  ReplayResult out;
  std::size_t cursor = 0;
  for (int f = 0; f < frames; ++f) {
    cursor = feed_samples(sim, trajectory, cursor, sim.input_time());
    const auto m = sim.step();
    out.metrics.push_back(m);
    out.timings.push_back(sim.last_timing());
    if (on_frame) on_frame(sim, m);
  }
  return out;
}

}  // namespace putty
