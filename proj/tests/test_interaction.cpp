#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "putty/interaction/edit.hpp"
#include "putty/interaction/simulation.hpp"
#include "support.hpp"

using namespace putty;
using nlohmann::json;

namespace {

SceneConfig small_scene(int grid = 32) {
  SceneConfig c;
  c.grid_resolution = grid;
  c.dt = default_dt(grid);
  c.substeps_per_frame = 10;
  ShapeSpec s;
  s.radius = 0.15;
  c.shapes.push_back(s);
  return c;
}

SceneConfig two_blobs() {
  auto c = small_scene();
  c.shapes[0].center = Vec3(0.3, 0.5, 0.5);
  c.shapes[0].radius = 0.1;
  ShapeSpec b;
  b.kind = ShapeKind::Box;
  b.center = Vec3(0.7, 0.5, 0.5);
  b.half_extents = Vec3(0.08, 0.05, 0.05);
  b.category = 1;
  c.shapes.push_back(b);
  return c;
}

Vec3 centroid(const ParticleSet& p) {
  Vec3 s = Vec3::Zero();
  for (const auto& x : p.x) s += x;
  return s / static_cast<Real>(p.size());
}

std::vector<std::array<Real, 3>> sorted_positions(const ParticleSet& p) {
  std::vector<std::array<Real, 3>> out;
  for (const auto& x : p.x) out.push_back({x(0), x(1), x(2)});
  std::sort(out.begin(), out.end());
  return out;
}

JointMap palm_at(const Vec3& p) { return JointMap{{"palm", Joint{p, Quat::Identity()}}}; }

Trajectory press_trajectory(int frames, Real interval) {
  Trajectory t;
  for (int f = 0; f <= frames; ++f) {
    TrajectorySample s;
    s.time = f * interval;
    s.hands[1] = palm_at(Vec3(0.5, 0.7 - 0.002 * f, 0.42));
    if (f == 0) s.events.push_back(ToolSelect{Hand::Right, "plate"});
    t.samples.push_back(s);
  }
  return t;
}

}  // namespace

TEST_CASE("trajectory json round trip") {
  Trajectory t = press_trajectory(3, 1.0 / 60);
  t.samples[1].events.push_back(PinchStart{Hand::Left, Vec3(0.5, 0.5, 0.5), 0.05, 2});
  t.samples[2].events.push_back(PinchMove{Hand::Left, Vec3(0.6, 0.5, 0.5)});
  t.samples[2].events.push_back(EditOp{MergeOp{{0, 1}, true}});
  t.samples[2].events.push_back(EditOp{ScaleVisualOp{0, 0.5}});
  t.samples[3].events.push_back(PinchEnd{Hand::Left});
  t.samples[3].events.push_back(MaterialChange{0, MaterialParams{}});
  const json j = trajectory_to_json(t);
  const Trajectory back = trajectory_from_json(json::parse(j.dump()));
  CHECK(trajectory_to_json(back) == j);
  REQUIRE(back.samples.size() == 4);
  CHECK(std::get<PinchStart>(back.samples[1].events[0]).force_ratio == 2);
  CHECK(std::get<MergeOp>(std::get<EditOp>(back.samples[2].events[1])).unify_categories);
}

TEST_CASE("trajectory validation") {
  auto sample = [](Real t, json events = json::array()) { return json{{"t", t}, {"events", events}}; };
  auto load = [](json samples) { return trajectory_from_json(json{{"version", 1}, {"samples", samples}}); };
  CHECK_NOTHROW(load(json::array({sample(0), sample(0.1)})));
  CHECK_THROWS_AS(load(json::array({sample(0.1), sample(0.1)})), ValidationError);
  CHECK_THROWS_AS(load(json::array({sample(0.2), sample(0.1)})), ValidationError);
  CHECK_THROWS_AS(load(json::array({sample(0, json::array({json{{"type", "pinch_move"}, {"hand", "left"}, {"position", {0, 0, 0}}}}))})),
                  ValidationError);
  CHECK_THROWS_AS(load(json::array({sample(0, json::array({json{{"type", "pinch_start"}, {"hand", "left"}, {"position", {0, 0, 0}}}})),
                                    sample(1, json::array({json{{"type", "pinch_end"}, {"hand", "right"}}}))})),
                  ValidationError);
  CHECK_THROWS_AS(load(json::array({sample(0, json::array({json{{"type", "wave"}}}))})), ValidationError);
  CHECK_THROWS_AS(trajectory_from_json(json{{"version", 7}, {"samples", json::array()}}), VersionError);
  CHECK(trajectory_from_json(json::object()).samples.empty());
  CHECK_THROWS_AS(trajectory_from_json(json{{"version", 1}, {"samples", {{{"t", "soon"}}}}}), ValidationError);
  CHECK_THROWS_AS(hand_from_name("middle"), ValidationError);
}

TEST_CASE("pose smoothing") {
  SUBCASE("constant and single sample") {
    PoseHistory h;
    h.push(0.0, palm_at(Vec3(0.1, 0.2, 0.3)));
    CHECK(smooth_pose(h, 0.0).at("palm").position == Vec3(0.1, 0.2, 0.3));
    for (int i = 1; i < 30; ++i) h.push(i / 90.0, palm_at(Vec3(0.1, 0.2, 0.3)));
    CHECK((smooth_pose(h, 29 / 90.0).at("palm").position - Vec3(0.1, 0.2, 0.3)).norm() < 1e-12);
  }
  SUBCASE("affine signals are reproduced") {
    for (int trial = 0; trial < 20; ++trial) {
      const Vec3 a = test::uniform_vec(-1, 1), b = test::uniform_vec(-1, 1);
      PoseHistory h;
      Real t = test::uniform(0, 5);
      for (int i = 0; i < 40; ++i) {
        t += test::uniform(0.005, 0.02);  // uneven frame durations
        h.push(t, palm_at(a + b * t));
      }
      CHECK((smooth_pose(h, t).at("palm").position - (a + b * t)).norm() < 1e-9);
      CHECK(h.samples().front().first >= t - 0.2 - 0.02);
    }
  }
  SUBCASE("noisy line: closer to truth than the raw sample") {
    // 120 Hz tracking, 3D noise. The fit uses every sample in the 0.2 s window.
    int better = 0;
    const int trials = 1000;
    std::normal_distribution<Real> noise(0, 0.002);
    for (int trial = 0; trial < trials; ++trial) {
      const Vec3 a = test::uniform_vec(0, 1), b = test::uniform_vec(-0.5, 0.5);
      PoseHistory h;
      Vec3 last_raw;
      Real t = 0;
      for (int i = 0; i < 60; ++i) {
        t = i / 120.0;
        last_raw = a + b * t + Vec3(noise(test::rng()), noise(test::rng()), noise(test::rng()));
        h.push(t, palm_at(last_raw));
      }
      const Vec3 truth = a + b * t;
      if ((smooth_pose(h, t).at("palm").position - truth).norm() < (last_raw - truth).norm()) ++better;
    }
    CHECK(better >= 900);
  }
  PoseHistory h;
  h.push(1.0, {});
  CHECK_THROWS_AS(h.push(1.0, {}), ValidationError);
  CHECK(smooth_pose(PoseHistory{}, 0).empty());
}

TEST_CASE("rig posing") {
  RigTemplate rig;
  rig.name = "pair";
  rig.spheres = {{"a", "a", 0, Vec3(0, 0, 0.01), 0.02}, {"b", "b", 0, Vec3::Zero(), 0.03}, {"a", "b", 0.5, Vec3::Zero(), 0.01}};
  rig.cones = {{0, 1}};
  rig.lone_spheres = {2};
  const JointMap joints{{"a", Joint{Vec3(0.4, 0.5, 0.5), Quat::Identity()}}, {"b", Joint{Vec3(0.6, 0.5, 0.5), Quat::Identity()}}};
  const Real frame_dt = 1.0 / 60;

  const auto first = pose_rig(rig, joints, nullptr, frame_dt);
  const auto still = pose_rig(rig, joints, &first, frame_dt);
  for (const auto& s : still.spheres) CHECK(s.velocity == Vec3::Zero());
  CHECK((first.spheres[2].center - Vec3(0.5, 0.5, 0.5)).norm() < 1e-15);

  const Vec3 u(0.01, -0.02, 0.005);
  JointMap moved = joints;
  for (auto& [name, j] : moved) j.position += u;
  const auto shifted = pose_rig(rig, moved, &first, frame_dt);
  for (const auto& s : shifted.spheres) CHECK((s.velocity - u / frame_dt).norm() < 1e-9);

  // 90 degrees about z through the origin: positions and orientations both rotate
  const Quat q(Eigen::AngleAxis<Real>(std::numbers::pi / 2, Vec3::UnitZ()));
  JointMap rotated = joints;
  for (auto& [name, j] : rotated) j = Joint{q * j.position, q};
  const auto turned = pose_rig(rig, rotated, &first, frame_dt);
  const Vec3 axis0 = first.spheres[1].center - first.spheres[0].center;
  const Vec3 axis1 = turned.spheres[1].center - turned.spheres[0].center;
  const Mat3 Rz = q.toRotationMatrix();
  CHECK((axis1 - Rz * axis0).norm() < 1e-12);
  CHECK(std::abs(axis0.dot(axis1) - (Rz * axis0).dot(axis0)) < 1e-12);
  for (std::size_t i = 0; i < rig.spheres.size(); ++i) {
    CHECK(turned.spheres[i].radius == first.spheres[i].radius);
    CHECK((turned.spheres[i].center - Rz * first.spheres[i].center).norm() < 1e-12);
  }

  CHECK_THROWS_AS(pose_rig(rig, JointMap{{"a", Joint{}}}, nullptr, frame_dt), ValidationError);
}

TEST_CASE("gesture force field") {
  ParticleSet p;
  p.push_back(Vec3(0.5, 0.5, 0.5), 1, 1e-6, 0, 0);
  p.push_back(Vec3(0.55, 0.5, 0.5), 1, 1e-6, 0, 0);
  p.push_back(Vec3(0.5, 0.7, 0.5), 1, 1e-6, 0, 0);
  GestureState g;
  CHECK_THROWS_AS(g.apply(PinchMove{Hand::Right, Vec3::Zero()}, p), GestureError);
  CHECK_THROWS_AS(g.apply(PinchEnd{Hand::Left}, p), GestureError);

  g.apply(PinchStart{Hand::Right, Vec3(0.5, 0.5, 0.5), 0.1, 1}, p);
  auto f = g.field(p, 1.0 / 60);
  for (const auto& v : f.forces) CHECK(v == Vec3::Zero());

  const Vec3 d(1, 0, 0);
  g.apply(PinchMove{Hand::Right, Vec3(0.5, 0.5, 0.5) + d}, p);
  f = g.field(p, 1.0 / 60);
  CHECK(f.forces[0] == d);
  CHECK((f.forces[1] - falloff_kernel(0.5) * d).norm() < 1e-15);
  CHECK(f.forces[2] == Vec3::Zero());
  CHECK(f.selected.size() == 2);

  CHECK(falloff_kernel(0.0) == 1);
  CHECK(falloff_kernel(1.0) == 0);
  CHECK(falloff_kernel(1.5) == 0);
  const Real h = 1e-6;
  CHECK(std::abs((falloff_kernel(1.0) - falloff_kernel(1.0 - h)) / h) < 1e-5);

  SUBCASE("twist about the inter-hand axis") {
    ParticleSet q;
    q.push_back(Vec3(0.5, 0.55, 0.5), 1, 1e-6, 0, 0);
    GestureState t;
    t.apply(PinchStart{Hand::Left, Vec3(0.45, 0.5, 0.5), 0.2, 1}, q);
    t.apply(PinchStart{Hand::Right, Vec3(0.55, 0.5, 0.5), 0.2, 1}, q);
    CHECK(t.field(q, 0.1).forces[0] == Vec3::Zero());  // no rotation yet
    // rotate the axis by a small angle about y
    const Real angle = 0.01;
    const Vec3 half(0.05 * std::cos(angle), 0, -0.05 * std::sin(angle));
    t.apply(PinchMove{Hand::Left, Vec3(0.5, 0.5, 0.5) - half}, q);
    t.apply(PinchMove{Hand::Right, Vec3(0.5, 0.5, 0.5) + half}, q);
    const auto tw = t.field(q, 0.1);
    const Real w = falloff_kernel(std::hypot(0.05, 0.05) / 0.2);
    const Vec3 expect = w * (Vec3(0, angle / 0.1, 0).cross(Vec3(0, 0.05, 0)));
    CHECK((tw.forces[0] - expect).norm() < 1e-9);
  }
}

TEST_CASE("steady stretch moves a blob along the pull") {
  auto c = small_scene();
  FrameSimulator sim(c);
  const Vec3 pull(0.05, 0, 0);
  sim.queue_event(PinchStart{Hand::Right, Vec3(0.6, 0.5, 0.5), 0.08, 1});
  sim.queue_event(PinchMove{Hand::Right, Vec3(0.6, 0.5, 0.5) + pull});
  Vec3 prev = centroid(sim.state().particles);
  const Vec3 start = prev;
  bool monotone = true;
  for (int f = 0; f < 10; ++f)
    sim.step([&](const SubstepReport&) {
      const Vec3 now = centroid(sim.state().particles);
      monotone = monotone && (now - prev).dot(pull) > 0;
      prev = now;
    });
  CHECK(monotone);
  const Vec3 moved = prev - start;
  CHECK(moved.dot(pull) > 0);
  CHECK(std::abs(moved.y()) < 1e-3 * moved.x());
}

TEST_CASE("object edits") {
  const auto c = two_blobs();
  FrameSimulator sim(c);
  const SimState base = sim.state();
  REQUIRE(base.objects.size() == 2);
  const auto count = [](const SimState& s, std::uint32_t cat) {
    return std::count(s.particles.category.begin(), s.particles.category.end(), cat);
  };

  SUBCASE("copy then delete restores the particle multiset") {
    SimState s = base;
    apply_edit(s, CopyOp{0, Vec3(0, 0.25, 0)}, base, c);
    CHECK(s.particles.size() == 2 * count(base, 0) + count(base, 1));
    CHECK(s.objects.size() == 3);
    const auto copy_id = s.objects.back().id;
    CHECK(s.objects.back().categories != base.objects[0].categories);
    apply_edit(s, DeleteOp{copy_id}, base, c);
    CHECK(sorted_positions(s.particles) == sorted_positions(base.particles));
  }
  SUBCASE("merge keeps categories by default") {
    SimState s = base;
    apply_edit(s, MergeOp{{0, 1}, false}, base, c);
    REQUIRE(s.objects.size() == 1);
    CHECK(s.objects[0].categories.size() == 2);
    CHECK(s.particles.size() == base.particles.size());
    CHECK(count(s, 0) == count(base, 0));
    CHECK(count(s, 1) == count(base, 1));
    SimState u = base;
    apply_edit(u, MergeOp{{0, 1}, true}, base, c);
    CHECK(u.objects[0].categories.size() == 1);
  }
  SUBCASE("visual scale leaves physics untouched") {
    SimState s = base;
    for (std::size_t i = 0; i < s.particles.size(); ++i) s.particles.F[i] = Mat3::Identity() + test::uniform_mat(-0.1, 0.1);
    const SimState before = s;
    apply_edit(s, ScaleVisualOp{0, 0.5}, base, c);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s.particles.size(); ++i) {
      CHECK(s.particles.F[i] == before.particles.F[i]);
      CHECK(s.particles.C[i] == before.particles.C[i]);
      CHECK(s.particles.v[i] == before.particles.v[i]);
      CHECK(s.particles.mass[i] == before.particles.mass[i]);
      if (s.particles.category[i] == 0) idx.push_back(i);
      else CHECK(s.particles.x[i] == before.particles.x[i]);
    }
    for (int k = 0; k < 200; ++k) {
      const auto i = idx[k * 37 % idx.size()], j = idx[(k * 91 + 5) % idx.size()];
      const Real d0 = (before.particles.x[i] - before.particles.x[j]).norm();
      CHECK(std::abs((s.particles.x[i] - s.particles.x[j]).norm() - 0.5 * d0) < 1e-12);
    }
  }
  SUBCASE("move, reset and errors") {
    SimState s = base;
    apply_edit(s, MoveOp{1, Vec3(0, 0.1, 0)}, base, c);
    for (std::size_t i = 0; i < s.particles.size(); ++i)
      CHECK((s.particles.x[i] - base.particles.x[i] - (s.particles.category[i] == 1 ? Vec3(0, 0.1, 0) : Vec3::Zero())).norm() <
            1e-15);
    s.frame = 7;
    apply_edit(s, ResetOp{}, base, c);
    CHECK(s.particles == base.particles);
    CHECK(s.frame == 7);
    CHECK_THROWS_AS(apply_edit(s, DeleteOp{42}, base, c), ValidationError);
    CHECK_THROWS_AS(apply_edit(s, CopyOp{0, Vec3(0.8, 0, 0)}, base, c), ValidationError);
    CHECK_THROWS_AS(apply_edit(s, MoveOp{1, Vec3(0, -0.6, 0)}, base, c), ValidationError);
    CHECK_THROWS_AS(apply_edit(s, MergeOp{{0, 9}}, base, c), ValidationError);
    CHECK(s.particles == base.particles);
  }
}

TEST_CASE("material change re-targets one object") {
  FrameSimulator sim(two_blobs());
  MaterialParams stiff;
  stiff.mu = 5e4;
  sim.queue_event(MaterialChange{1, stiff});
  sim.step();
  const auto& p = sim.state().particles;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& m = sim.solver().materials()[p.material[i]];
    CHECK(m.mu == (p.category[i] == 1 ? 5e4 : MaterialParams{}.mu));
  }
}

TEST_CASE("replay") {
  SUBCASE("no input keeps a resting object unchanged") {
    FrameSimulator sim(small_scene());
    const auto before = sim.state().particles;
    const auto r = replay(sim, Trajectory{}, 5);
    CHECK(r.metrics.size() == 5);
    CHECK(sim.state().particles == before);
    CHECK(sim.state().frame == 5);
  }
  SUBCASE("deterministic metrics and state") {
    const auto c = small_scene();
    const auto t = press_trajectory(12, c.frame_interval);
    auto run = [&] {
      FrameSimulator sim(c);
      auto r = replay(sim, t, 12);
      json lines = json::array();
      for (const auto& m : r.metrics) lines.push_back(metrics_to_json(m));
      return std::make_pair(lines.dump(), sim.state());
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    // the plate actually reached the clay
    FrameSimulator sim(c);
    const auto r = replay(sim, t, 12);
    std::size_t projected = 0;
    for (const auto& m : r.metrics) projected += m.projected;
    CHECK(projected > 0);
  }
}
