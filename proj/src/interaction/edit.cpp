#include "putty/interaction/edit.hpp"

#include <algorithm>
#include <map>

namespace putty {

namespace {

bool has(const std::vector<std::uint32_t>& cats, std::uint32_t c) {
  return std::find(cats.begin(), cats.end(), c) != cats.end();
}

const SceneObject& require(const SimState& state, std::uint32_t id, const std::string& field) {
  const auto* obj = state.find_object(id);
  if (!obj) throw ValidationError(field, "unknown object id " + std::to_string(id));
  return *obj;
}

/// Throws unless every moved point stays inside the particle range.
template <typename Map>
void check_inside(const SimState& state, const SceneObject& obj, const SceneConfig& config, Map map, const std::string& field) {
  const auto [lo, hi] = particle_bounds(config.grid_resolution, config.dx());
  auto inside = [&](const Vec3& x) { return (x.array() >= lo).all() && (x.array() <= hi).all(); };
  for (std::size_t i = 0; i < state.particles.size(); ++i)
    if (has(obj.categories, state.particles.category[i]) && !inside(map(state.particles.x[i])))
      throw ValidationError(field, "edit would move object " + std::to_string(obj.id) + " outside the domain");
  for (std::size_t i = 0; i < state.appearance.size(); ++i)
    if (has(obj.categories, state.appearance.category[i]) && !inside(map(state.appearance.x[i])))
      throw ValidationError(field, "edit would move object " + std::to_string(obj.id) + " outside the domain");
}

}  // namespace

Vec3 object_centroid(const SimState& state, const SceneObject& object) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < state.particles.size(); ++i)
    if (has(object.categories, state.particles.category[i])) {
      sum += state.particles.x[i];
      ++n;
    }
  if (n == 0)
    for (std::size_t i = 0; i < state.appearance.size(); ++i)
      if (has(object.categories, state.appearance.category[i])) {
        sum += state.appearance.x[i];
        ++n;
      }
  return n ? Vec3(sum / static_cast<Real>(n)) : sum;
}

void apply_edit(SimState& state, const EditOp& op, const SimState& initial, const SceneConfig& config) {
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, MergeOp>) {
          if (e.objects.empty()) throw ValidationError("merge.objects", "needs at least one object");
          for (auto id : e.objects) require(state, id, "merge.objects");
          SceneObject merged{e.objects.front(), {}};
          for (auto id : e.objects)
            for (auto c : state.find_object(id)->categories)
              if (!has(merged.categories, c)) merged.categories.push_back(c);
          std::erase_if(state.objects, [&](const SceneObject& o) { return has(e.objects, o.id); });
          if (e.unify_categories) {
            const auto target = merged.categories.front();
            for (auto& c : state.particles.category)
              if (has(merged.categories, c)) c = target;
            for (auto& c : state.appearance.category)
              if (has(merged.categories, c)) c = target;
            merged.categories = {target};
          }
          state.objects.push_back(merged);
          std::sort(state.objects.begin(), state.objects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        } else if constexpr (std::is_same_v<T, CopyOp>) {
          const SceneObject obj = require(state, e.object, "copy.object");
          check_inside(state, obj, config, [&](const Vec3& x) { return Vec3(x + e.offset); }, "copy.offset");
          std::map<std::uint32_t, std::uint32_t> fresh;
          SceneObject copy{state.next_object_id++, {}};
          for (auto c : obj.categories) {
            fresh[c] = state.next_category++;
            copy.categories.push_back(fresh[c]);
          }
          const std::size_t np = state.particles.size();
          for (std::size_t i = 0; i < np; ++i) {
            if (!has(obj.categories, state.particles.category[i])) continue;
            state.particles.push_copy(state.particles, i);
            state.particles.x.back() += e.offset;
            state.particles.category.back() = fresh[state.particles.category[i]];
          }
          const std::size_t ns = state.appearance.size();
          for (std::size_t i = 0; i < ns; ++i) {
            if (!has(obj.categories, state.appearance.category[i])) continue;
            state.appearance.push_copy(state.appearance, i);
            state.appearance.x.back() += e.offset;
            state.appearance.category.back() = fresh[state.appearance.category[i]];
          }
          state.objects.push_back(copy);
        } else if constexpr (std::is_same_v<T, DeleteOp>) {
          const SceneObject obj = require(state, e.object, "delete.object");
          state.particles.retain([&](std::size_t i) { return !has(obj.categories, state.particles.category[i]); });
          state.appearance.retain([&](std::size_t i) { return !has(obj.categories, state.appearance.category[i]); });
          std::erase_if(state.objects, [&](const SceneObject& o) { return o.id == obj.id; });
        } else if constexpr (std::is_same_v<T, ResetOp>) {
          const auto frame = state.frame;
          const auto time = state.time;
          state = initial;
          state.frame = frame;
          state.time = time;
        } else if constexpr (std::is_same_v<T, ScaleVisualOp>) {
          if (!(e.factor > 0)) throw ValidationError("scale_visual.factor", "must be > 0");
          const SceneObject obj = require(state, e.object, "scale_visual.object");
          const Vec3 c = object_centroid(state, obj);
          const auto map = [&](const Vec3& x) { return Vec3(c + e.factor * (x - c)); };
          check_inside(state, obj, config, map, "scale_visual.factor");
          for (std::size_t i = 0; i < state.particles.size(); ++i)
            if (has(obj.categories, state.particles.category[i])) state.particles.x[i] = map(state.particles.x[i]);
          const Real s2 = e.factor * e.factor;
          for (std::size_t i = 0; i < state.appearance.size(); ++i)
            if (has(obj.categories, state.appearance.category[i])) {
              state.appearance.x[i] = map(state.appearance.x[i]);
              state.appearance.rest_cov[i] *= s2;
              state.appearance.cov[i] *= s2;
            }
        } else {
          const SceneObject obj = require(state, e.object, "move.object");
          const auto map = [&](const Vec3& x) { return Vec3(x + e.offset); };
          check_inside(state, obj, config, map, "move.offset");
          for (std::size_t i = 0; i < state.particles.size(); ++i)
            if (has(obj.categories, state.particles.category[i])) state.particles.x[i] += e.offset;
          for (std::size_t i = 0; i < state.appearance.size(); ++i)
            if (has(obj.categories, state.appearance.category[i])) state.appearance.x[i] += e.offset;
        }
      },
      op);
}

}  // namespace putty
