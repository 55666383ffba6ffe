#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "putty/core/kernel.hpp"
#include "putty/core/scene.hpp"
#include "putty/core/state.hpp"
#include "support.hpp"

using namespace putty;

namespace {

// Independent 1-D quadratic B-spline, written from the piecewise definition.
double bspline_oracle(double r) {
  r = std::fabs(r);
  if (r >= 1.5) return 0;
  if (r >= 0.5) return (1.5 - r) * (1.5 - r) / 2;
  return 0.75 - r * r;
}

}  // namespace

TEST_CASE("quadratic stencil is a nonnegative partition of unity") {
  const Real dx = 1.0 / 64;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec3 x = test::uniform_vec(0.1, 0.9);
    const auto st = quadratic_stencil(x, 1 / dx);
    Real sum = 0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c) {
          const Real w = st.weight(a, b, c);
          CHECK(w >= 0);
          CHECK(w <= 1);
          sum += w;
        }
    CHECK(std::abs(sum - 1) < 1e-12);
  }
}

TEST_CASE("stencil weights match the scalar kernel at node distances") {
  const Real dx = 0.05;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 x = test::uniform_vec(0.2, 0.8);
    const auto st = quadratic_stencil(x, 1 / dx);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c) {
          const Vec3 node = (st.base + Vec3i(a, b, c)).cast<Real>() * dx;
          const Vec3 r = (x - node) / dx;
          const double expect = bspline_oracle(r(0)) * bspline_oracle(r(1)) * bspline_oracle(r(2));
          CHECK(std::abs(st.weight(a, b, c) - expect) < 1e-14);
          CHECK(quadratic_bspline(r(0)) == doctest::Approx(bspline_oracle(r(0))).epsilon(1e-15));
        }
  }
}

TEST_CASE("scene defaults and validation") {
  SUBCASE("minimal scene fills defaults") {
    const auto c = parse_scene(R"({"shapes": [{"type": "sphere", "center": [0.5, 0.5, 0.5], "radius": 0.2}]})");
    CHECK(c.grid_resolution == 64);
    CHECK(c.particles_per_cell == 8);
    CHECK(c.substeps_per_frame == 5);
    CHECK(c.dt == doctest::Approx(1e-4));
    CHECK(c.shapes.size() == 1);
  }
  SUBCASE("empty shape list is valid and seeds nothing") {
    const auto c = parse_scene(R"({"shapes": []})");
    CHECK(seed_particles(c).empty());
  }
  SUBCASE("shape outside domain") {
    try {
      parse_scene(R"({"shapes": [{"type": "sphere", "center": [0.5, 0.5, 0.5], "radius": 0.9}]})");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("shape outside domain") != std::string::npos);
      CHECK(e.field().find("shapes[0]") != std::string::npos);
    }
  }
  SUBCASE("non-positive dt names the field") {
    try {
      parse_scene(R"({"dt": 0})");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.field().find("dt") != std::string::npos);
    }
  }
  SUBCASE("malformed text") { CHECK_THROWS_AS(parse_scene("{\"grid\": 64,"), ParseError); }
  SUBCASE("dt scales with spacing") { CHECK(parse_scene(R"({"grid": 32})").dt == doctest::Approx(2e-4)); }
}

TEST_CASE("scene json round trip") {
  auto c = parse_scene(R"({"grid": 48, "gravity": [0, -9.8, 0], "walls": "sticky",
    "materials": [{"name": "sand", "mu": 100, "lambda": 200, "density": 1500, "stress": "corotated",
                   "plasticity": {"type": "drucker_prager", "alpha": 0.3}},
                  {"name": "gel", "youngs": 1000, "poisson": 0.2, "plasticity": {"type": "clamp", "sigma_min": 0.9, "sigma_max": 1.1}}],
    "shapes": [{"type": "torus", "center": [0.5, 0.5, 0.5], "radius": 0.2, "minor_radius": 0.05, "material": "gel"},
               {"type": "box", "center": [0.3, 0.3, 0.3], "half_extents": [0.05, 0.05, 0.1]}],
    "localized": {"enabled": true, "half_side": 0.1}})");
  const auto again = scene_from_json(scene_to_json(c));
  CHECK(scene_to_json(again).dump() == scene_to_json(c).dump());
  CHECK(again.shapes[0].material == 1);
  CHECK(again.materials[1].mu == doctest::Approx(1000 / (2 * 1.2)));
}

TEST_CASE("seeding") {
  SUBCASE("one full cell receives exactly ppc particles") {
    SceneConfig c;
    c.grid_resolution = 16;
    ShapeSpec box;
    box.kind = ShapeKind::Box;
    const Real dx = c.dx();
    box.center = Vec3::Constant(7.5 * dx);
    box.half_extents = Vec3::Constant(dx / 2);
    c.shapes.push_back(box);
    const auto p = seed_particles(c);
    CHECK(p.size() == 8);
    for (const auto& x : p.x) CHECK(((x / dx).array().floor() == 7).all());
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p.volume0[i] == doctest::Approx(dx * dx * dx / 8));
      CHECK(p.mass[i] == doctest::Approx(1000 * dx * dx * dx / 8));
      CHECK(p.F[i] == Mat3::Identity());
      CHECK(p.C[i] == Mat3::Zero());
    }
  }
  SUBCASE("sphere count matches analytic volume within 2%") {
    SceneConfig c;
    ShapeSpec s;
    s.radius = 0.3;
    c.shapes.push_back(s);
    const auto p = seed_particles(c);
    const Real dx = c.dx();
    const Real expect = 8 * (4.0 / 3.0 * std::numbers::pi * 0.027) / (dx * dx * dx);
    CHECK(std::abs(static_cast<Real>(p.size()) - expect) / expect < 0.02);
  }
  SUBCASE("deterministic under a fixed seed, different across seeds") {
    SceneConfig c;
    ShapeSpec s;
    s.radius = 0.1;
    c.shapes.push_back(s);
    CHECK(seed_particles(c) == seed_particles(c));
    auto d = c;
    d.seed = 7;
    CHECK(!(seed_particles(d) == seed_particles(c)));
  }
}

namespace {

SimState small_state() {
  SceneConfig c;
  c.grid_resolution = 16;
  ShapeSpec s;
  s.radius = 0.2;
  c.shapes.push_back(s);
  SimState st;
  st.particles = seed_particles(c);
  for (std::size_t i = 0; i < st.particles.size(); ++i) {
    st.particles.v[i] = test::uniform_vec(-1, 1);
    st.particles.F[i] = test::random_deformation(0.1, 0.5);
    st.particles.C[i] = test::uniform_mat(-1, 1);
  }
  st.appearance.payload_width = 4;
  const float rgba[4] = {0.1f, 0.2f, 0.3f, 1.0f};
  for (int i = 0; i < 5; ++i) st.appearance.push_back(test::uniform_vec(), Mat3::Identity() * 1e-4, 0, 0, rgba);
  st.rebuild_objects();
  st.frame = 12;
  st.time = 0.2;
  return st;
}

}  // namespace

TEST_CASE("snapshot round trip") {
  Snapshot snap{3, 1.5, small_state()};
  const auto bytes = encode_snapshot(snap);
  const auto back = decode_snapshot(bytes);
  CHECK(back == snap);
  CHECK(encode_snapshot(back) == bytes);

  SUBCASE("header layout") {
    REQUIRE(bytes.size() > 16);
    CHECK(bytes[0] == 'P');
    CHECK(bytes[1] == 'T');
    CHECK(bytes[2] == 'Y');
    CHECK(bytes[3] == 'S');
  }
  SUBCASE("restore after drift equals the saved state") {
    auto drifted = snap.state;
    for (auto& x : drifted.particles.x) x += Vec3::Constant(0.01);
    CHECK(!(drifted == snap.state));
    CHECK(decode_snapshot(bytes).state == snap.state);
  }
  SUBCASE("unknown version") {
    auto bad = bytes;
    bad[4] = 99;
    CHECK_THROWS_AS(decode_snapshot(bad), VersionError);
  }
  SUBCASE("truncated payload") {
    auto bad = bytes;
    bad.resize(bad.size() - 3);
    CHECK_THROWS_AS(decode_snapshot(bad), ParseError);
  }
  SUBCASE("file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "putty_snapshot_test.bin";
    save_snapshot(snap, path);
    CHECK(load_snapshot(path) == snap);
    std::filesystem::remove(path);
  }
}
