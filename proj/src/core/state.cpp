#include "putty/core/state.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace putty {

void AppearanceSet::push_back(const Vec3& pos, const Mat3& rest_covariance, std::uint16_t mat, std::uint32_t cat,
                              std::span<const float> extra) {
  x.push_back(pos);
  v.push_back(Vec3::Zero());
  rest_cov.push_back(rest_covariance);
  cov.push_back(rest_covariance);
  F.push_back(Mat3::Identity());
  C.push_back(Mat3::Zero());
  material.push_back(mat);
  category.push_back(cat);
  active.push_back(1);
  for (int k = 0; k < payload_width; ++k) payload.push_back(k < static_cast<int>(extra.size()) ? extra[k] : 0.0f);
}

void AppearanceSet::push_copy(const AppearanceSet& o, std::size_t i) {
  x.push_back(o.x[i]);
  v.push_back(o.v[i]);
  rest_cov.push_back(o.rest_cov[i]);
  cov.push_back(o.cov[i]);
  F.push_back(o.F[i]);
  C.push_back(o.C[i]);
  material.push_back(o.material[i]);
  category.push_back(o.category[i]);
  active.push_back(o.active[i]);
  const auto w = static_cast<std::size_t>(o.payload_width);
  payload.insert(payload.end(), o.payload.begin() + static_cast<std::ptrdiff_t>(i * w),
                 o.payload.begin() + static_cast<std::ptrdiff_t>((i + 1) * w));
}

void SimState::rebuild_objects() {
  std::set<std::uint32_t> cats(particles.category.begin(), particles.category.end());
  cats.insert(appearance.category.begin(), appearance.category.end());
  objects.clear();
  next_object_id = 0;
  for (auto c : cats) objects.push_back(SceneObject{next_object_id++, {c}});
  next_category = cats.empty() ? 0 : *cats.rbegin() + 1;
}

const SceneObject* SimState::find_object(std::uint32_t id) const {
  auto it = std::find_if(objects.begin(), objects.end(), [&](const SceneObject& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

// ---------------------------------------------------------------------------
// Binary snapshot codec

namespace {

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return value;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &value, sizeof(T));
    std::reverse(std::begin(b), std::end(b));
    std::memcpy(&value, b, sizeof(T));
    return value;
  }
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    value = to_little(value);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put(const Vec3& v) {
    for (int d = 0; d < 3; ++d) put<double>(v(d));
  }
  void put(const Mat3& m) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) put<double>(m(r, c));
  }
  template <typename T>
  void put_all(const std::vector<T>& values) {
    for (const auto& v : values) put(v);
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw ParseError("snapshot: truncated payload");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(value);
  }
  Vec3 get_vec() {
    Vec3 v;
    for (int d = 0; d < 3; ++d) v(d) = get<double>();
    return v;
  }
  Mat3 get_mat() {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = get<double>();
    return m;
  }
  template <typename T, typename Fn>
  void fill(std::vector<T>& out, std::size_t n, Fn fn) {
    out.resize(n);
    for (auto& v : out) v = fn();
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const Snapshot& snap) {
  const auto& st = snap.state;
  const auto& p = st.particles;
  const auto& a = st.appearance;
  Writer w;
  w.put<std::uint32_t>(Snapshot::kMagic);
  w.put<std::uint32_t>(Snapshot::kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.size()));

  w.put<std::uint64_t>(snap.id);
  w.put<double>(snap.timestamp);
  w.put<std::uint64_t>(st.frame);
  w.put<double>(st.time);
  w.put<std::uint32_t>(st.next_object_id);
  w.put<std::uint32_t>(st.next_category);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(st.objects.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.payload_width));
  for (const auto& o : st.objects) {
    w.put<std::uint32_t>(o.id);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(o.categories.size()));
    for (auto c : o.categories) w.put<std::uint32_t>(c);
  }

  w.put_all(p.x);
  w.put_all(p.v);
  w.put_all(p.mass);
  w.put_all(p.volume0);
  w.put_all(p.F);
  w.put_all(p.C);
  w.put_all(p.material);
  w.put_all(p.category);
  w.put_all(p.active);

  w.put_all(a.x);
  w.put_all(a.v);
  w.put_all(a.rest_cov);
  w.put_all(a.cov);
  w.put_all(a.F);
  w.put_all(a.C);
  w.put_all(a.material);
  w.put_all(a.category);
  w.put_all(a.active);
  w.put_all(a.payload);
  return std::move(w.bytes);
}

Snapshot decode_snapshot(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.get<std::uint32_t>() != Snapshot::kMagic) throw ParseError("snapshot: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != Snapshot::kVersion)
    throw VersionError("snapshot: unsupported schema version " + std::to_string(version) + " (expected " +
                       std::to_string(Snapshot::kVersion) + ")");
  const std::size_t np = r.get<std::uint32_t>();
  const std::size_t na = r.get<std::uint32_t>();

  Snapshot snap;
  auto& st = snap.state;
  snap.id = r.get<std::uint64_t>();
  snap.timestamp = r.get<double>();
  st.frame = r.get<std::uint64_t>();
  st.time = r.get<double>();
  st.next_object_id = r.get<std::uint32_t>();
  st.next_category = r.get<std::uint32_t>();
  const std::size_t nobj = r.get<std::uint32_t>();
  st.appearance.payload_width = static_cast<int>(r.get<std::uint32_t>());
  for (std::size_t i = 0; i < nobj; ++i) {
    SceneObject o;
    o.id = r.get<std::uint32_t>();
    const std::size_t nc = r.get<std::uint32_t>();
    for (std::size_t c = 0; c < nc; ++c) o.categories.push_back(r.get<std::uint32_t>());
    st.objects.push_back(std::move(o));
  }

  auto vec = [&] { return r.get_vec(); };
  auto mat = [&] { return r.get_mat(); };
  auto& p = st.particles;
  r.fill(p.x, np, vec);
  r.fill(p.v, np, vec);
  r.fill(p.mass, np, [&] { return r.get<double>(); });
  r.fill(p.volume0, np, [&] { return r.get<double>(); });
  r.fill(p.F, np, mat);
  r.fill(p.C, np, mat);
  r.fill(p.material, np, [&] { return r.get<std::uint16_t>(); });
  r.fill(p.category, np, [&] { return r.get<std::uint32_t>(); });
  r.fill(p.active, np, [&] { return r.get<std::uint8_t>(); });

  auto& a = st.appearance;
  r.fill(a.x, na, vec);
  r.fill(a.v, na, vec);
  r.fill(a.rest_cov, na, mat);
  r.fill(a.cov, na, mat);
  r.fill(a.F, na, mat);
  r.fill(a.C, na, mat);
  r.fill(a.material, na, [&] { return r.get<std::uint16_t>(); });
  r.fill(a.category, na, [&] { return r.get<std::uint32_t>(); });
  r.fill(a.active, na, [&] { return r.get<std::uint8_t>(); });
  r.fill(a.payload, na * static_cast<std::size_t>(a.payload_width), [&] { return r.get<float>(); });
  if (!r.done()) throw ParseError("snapshot: trailing bytes");
  return snap;
}

void save_snapshot(const Snapshot& snapshot, const std::filesystem::path& path) {
  const auto bytes = encode_snapshot(snapshot);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write snapshot " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read snapshot " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace putty
