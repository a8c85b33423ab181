#include "escroom/error.hpp"
#include "escroom/gltf.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace escroom;
using nlohmann::json;

namespace {

// Hand-rolled GLTF writer used as the test-side source of truth.
class Fixture {
 public:
  // Adds a primitive list as one mesh; returns the mesh index. `index_type`
  // is a GLTF componentType (5121/5123/5125) or 0 for non-indexed.
  int mesh(const std::vector<std::vector<float>>& prims, const std::vector<std::vector<std::uint32_t>>& indices,
           int index_type, int mode = 4) {
    json m{{"primitives", json::array()}};
    for (std::size_t p = 0; p < prims.size(); ++p) {
      json prim{{"attributes", {{"POSITION", accessor(prims[p], 5126, "VEC3", prims[p].size() / 3)}}}, {"mode", mode}};
      if (index_type) {
        std::vector<std::uint8_t> raw;
        for (auto i : indices[p]) {
          int size = index_type == 5121 ? 1 : index_type == 5123 ? 2 : 4;
          for (int b = 0; b < size; ++b) raw.push_back(static_cast<std::uint8_t>(i >> (8 * b)));
        }
        prim["indices"] = view_accessor(raw, index_type, "SCALAR", indices[p].size());
      }
      m["primitives"].push_back(prim);
    }
    doc_["meshes"].push_back(m);
    return static_cast<int>(doc_["meshes"].size() - 1);
  }

  int node(json n) {
    doc_["nodes"].push_back(std::move(n));
    return static_cast<int>(doc_["nodes"].size() - 1);
  }

  void scene(std::vector<int> roots) { doc_["scenes"] = json::array({{{"nodes", roots}}}); }

  json& doc() { return doc_; }
  const std::vector<std::uint8_t>& bin() const { return bin_; }

  std::vector<std::uint8_t> glb() const {
    json d = doc_;
    d["buffers"] = json::array({{{"byteLength", bin_.size()}}});
    std::string text = d.dump();
    while (text.size() % 4) text += ' ';
    std::vector<std::uint8_t> bin = bin_;
    while (bin.size() % 4) bin.push_back(0);
    std::vector<std::uint8_t> out;
    auto u32 = [&](std::uint32_t v) {
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    };
    u32(0x46546C67);
    u32(2);
    u32(static_cast<std::uint32_t>(12 + 8 + text.size() + 8 + bin.size()));
    u32(static_cast<std::uint32_t>(text.size()));
    u32(0x4E4F534A);
    out.insert(out.end(), text.begin(), text.end());
    u32(static_cast<std::uint32_t>(bin.size()));
    u32(0x004E4942);
    out.insert(out.end(), bin.begin(), bin.end());
    return out;
  }

  // Separate .gltf + .bin pair on disk.
  std::filesystem::path write_gltf(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json d = doc_;
    d["buffers"] = json::array({{{"byteLength", bin_.size()}, {"uri", "scene.bin"}}});
    std::ofstream(dir / "scene.gltf") << d.dump(2);
    std::ofstream bin(dir / "scene.bin", std::ios::binary);
    bin.write(reinterpret_cast<const char*>(bin_.data()), static_cast<std::streamsize>(bin_.size()));
    return dir / "scene.gltf";
  }

 private:
  int accessor(const std::vector<float>& v, int type, const char* shape, std::size_t count) {
    std::vector<std::uint8_t> raw(v.size() * 4);
    std::memcpy(raw.data(), v.data(), raw.size());
    return view_accessor(raw, type, shape, count);
  }

  int view_accessor(const std::vector<std::uint8_t>& raw, int type, const char* shape, std::size_t count) {
    while (bin_.size() % 4) bin_.push_back(0);
    doc_["bufferViews"].push_back({{"buffer", 0}, {"byteOffset", bin_.size()}, {"byteLength", raw.size()}});
    bin_.insert(bin_.end(), raw.begin(), raw.end());
    doc_["accessors"].push_back(
        {{"bufferView", doc_["bufferViews"].size() - 1}, {"componentType", type}, {"type", shape}, {"count", count}});
    return static_cast<int>(doc_["accessors"].size() - 1);
  }

  json doc_{{"asset", {{"version", "2.0"}}}, {"nodes", json::array()}, {"meshes", json::array()},
            {"accessors", json::array()}, {"bufferViews", json::array()}};
  std::vector<std::uint8_t> bin_;
};

std::vector<float> unit_quad() { return {0, 0, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1}; }
std::vector<std::uint32_t> quad_indices() { return {0, 2, 1, 0, 3, 2}; }

// Test-side walk of the index buffers: triangles per node instance of a mesh.
std::size_t walk_triangles(const json& doc, const std::vector<std::uint8_t>& bin) {
  std::size_t total = 0;
  for (const auto& node : doc["nodes"]) {
    if (!node.contains("mesh")) continue;
    for (const auto& prim : doc["meshes"][node["mesh"].get<std::size_t>()]["primitives"]) {
      std::size_t count;
      if (prim.contains("indices")) {
        const auto& acc = doc["accessors"][prim["indices"].get<std::size_t>()];
        const auto& view = doc["bufferViews"][acc["bufferView"].get<std::size_t>()];
        std::size_t size = acc["componentType"] == 5121 ? 1 : acc["componentType"] == 5123 ? 2 : 4;
        count = acc["count"].get<std::size_t>();
        EXPECT_GE(view["byteLength"].get<std::size_t>(), count * size);
        EXPECT_LE(view["byteOffset"].get<std::size_t>() + count * size, bin.size());
      } else {
        count = doc["accessors"][prim["attributes"]["POSITION"].get<std::size_t>()]["count"].get<std::size_t>();
      }
      total += count / 3;
    }
  }
  return total;
}

double total_area(const std::vector<Triangle>& tris) {
  double a = 0;
  for (const auto& t : tris) a += t.area();
  return a;
}

using Key = std::array<long long, 9>;
std::vector<Key> canonical(const std::vector<Triangle>& tris) {
  std::vector<Key> out;
  for (const auto& t : tris) {
    Key k;
    for (int v = 0; v < 3; ++v)
      for (int c = 0; c < 3; ++c) k[static_cast<std::size_t>(v * 3 + c)] = std::llround(t.v[static_cast<std::size_t>(v)][c] * 1e5);
    // rotate so the smallest vertex is first; keeps winding
    std::array<Key, 3> rots;
    for (int r = 0; r < 3; ++r)
      for (int i = 0; i < 9; ++i) rots[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] = k[static_cast<std::size_t>((i + 3 * r) % 9)];
    out.push_back(*std::min_element(rots.begin(), rots.end()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Apartment-like fixture: a floor plus three door slabs sharing one mesh.
Fixture apartment(bool reversed) {
  Fixture f;
  int floor = f.mesh({unit_quad()}, {quad_indices()}, 5123);
  int door = f.mesh({{0, 0, 0, 0, 2, 0, 0, 2, 1, 0, 0, 0, 0, 2, 1, 0, 0, 1}}, {}, 0);
  std::vector<json> nodes = {
      {{"name", "floor"}, {"mesh", floor}, {"scale", {8, 1, 6}}},
      {{"name", "apartmentDoor"}, {"mesh", door}, {"translation", {2, 0, 0}}},
      {{"name", "apartmentDoor001"}, {"mesh", door}, {"translation", {4, 0, 0}}},
      {{"name", "apartmentDoor002"}, {"mesh", door}, {"translation", {6, 0, 0}}},
  };
  if (reversed) std::reverse(nodes.begin(), nodes.end());
  std::vector<int> ids;
  for (auto& n : nodes) ids.push_back(f.node(n));
  f.scene(ids);
  return f;
}

}  // namespace

TEST(LoadGltf, SingleTriangleGlb) {
  Fixture f;
  int m = f.mesh({{0, 0, 0, 1, 0, 0, 0, 0, 1}}, {}, 0);
  f.scene({f.node({{"name", "tri"}, {"mesh", m}})});
  auto asset = load_gltf_bytes(f.glb());
  ASSERT_EQ(asset.nodes().size(), 1u);
  EXPECT_EQ(asset.triangle_count(), 1u);
  auto tris = extract_triangles(asset);
  ASSERT_EQ(tris.size(), 1u);
  EXPECT_EQ(tris[0].v[1], Vec3(1, 0, 0));
}

TEST(LoadGltf, TriangleCountMatchesIndexBufferWalk) {
  std::mt19937 rng(4);
  for (int iter = 0; iter < 20; ++iter) {
    Fixture f;
    std::vector<int> roots;
    int meshes = static_cast<int>(rng() % 4) + 1;
    for (int m = 0; m < meshes; ++m) {
      const int types[] = {0, 5121, 5123, 5125};
      int type = types[rng() % 4];
      std::vector<std::vector<float>> prims;
      std::vector<std::vector<std::uint32_t>> idx;
      int nprims = static_cast<int>(rng() % 3) + 1;
      for (int p = 0; p < nprims; ++p) {
        int verts = static_cast<int>(rng() % 9 + 3);
        std::vector<float> pos;
        for (int v = 0; v < verts * 3; ++v) pos.push_back(static_cast<float>(rng() % 100) / 10.0f);
        if (type == 0) pos.resize(static_cast<std::size_t>(verts / 3 * 9));
        std::vector<std::uint32_t> ind;
        int tris = static_cast<int>(rng() % 7) + 1;
        for (int t = 0; t < tris * 3; ++t) ind.push_back(static_cast<std::uint32_t>(rng() % static_cast<unsigned>(verts)));
        prims.push_back(pos);
        idx.push_back(ind);
      }
      int mesh = f.mesh(prims, idx, type);
      roots.push_back(f.node({{"name", "m" + std::to_string(m)}, {"mesh", mesh}}));
    }
    auto glb = f.glb();
    auto asset = load_gltf_bytes(glb);
    EXPECT_EQ(asset.triangle_count(), walk_triangles(f.doc(), f.bin()));
    EXPECT_EQ(extract_triangles(asset).size(), walk_triangles(f.doc(), f.bin()));
  }
}

TEST(LoadGltf, SeparateBufferFile) {
  auto dir = std::filesystem::temp_directory_path() / "escroom_gltf_test";
  auto path = apartment(false).write_gltf(dir);
  auto asset = load_gltf(path);
  EXPECT_EQ(asset.triangle_count(), 2u + 2u);
  EXPECT_EQ(extract_triangles(asset).size(), 2u + 3u * 2u);
  std::filesystem::remove_all(dir);
}

TEST(LoadGltf, ApartmentDoorNames) {
  auto asset = load_gltf_bytes(apartment(false).glb());
  for (const char* name : {"apartmentDoor", "apartmentDoor001", "apartmentDoor002"})
    EXPECT_TRUE(asset.find_node(name)) << name;
}

TEST(LoadGltf, DuplicateNamesGetStableSuffixes) {
  Fixture f;
  int m = f.mesh({unit_quad()}, {quad_indices()}, 5125);
  f.scene({f.node({{"name", "door"}, {"mesh", m}}), f.node({{"name", "door"}, {"mesh", m}}),
           f.node({{"name", "door"}, {"mesh", m}})});
  auto a = load_gltf_bytes(f.glb());
  auto b = load_gltf_bytes(f.glb());
  std::vector<std::string> names, again;
  for (const auto& n : a.nodes()) names.push_back(n.name);
  for (const auto& n : b.nodes()) again.push_back(n.name);
  EXPECT_EQ(names, (std::vector<std::string>{"door", "door.001", "door.002"}));
  EXPECT_EQ(names, again);
}

TEST(LoadGltf, TriangleStripAndFan) {
  Fixture f;
  std::vector<float> strip = {0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 2, 0, 0};
  int s = f.mesh({strip}, {}, 0, 5);
  int fan = f.mesh({strip}, {}, 0, 6);
  f.scene({f.node({{"name", "strip"}, {"mesh", s}}), f.node({{"name", "fan"}, {"mesh", fan}})});
  auto asset = load_gltf_bytes(f.glb());
  EXPECT_EQ(extract_triangles(asset, "strip").size(), 3u);
  EXPECT_EQ(extract_triangles(asset, "fan").size(), 3u);
  for (const auto& t : extract_triangles(asset, "strip")) EXPECT_GT(t.normal().y(), 0.99);
}

TEST(LoadGltf, Errors) {
  auto code = [](const std::string& text) {
    try {
      load_gltf_bytes(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  EXPECT_EQ(code("{not json"), Errc::MalformedGltf);
  EXPECT_EQ(code(R"({"asset":{"version":"1.0"}})"), Errc::MalformedGltf);
  EXPECT_EQ(code(R"({"asset":{"version":"2.0"},"extensionsRequired":["KHR_draco_mesh_compression"]})"),
            Errc::UnsupportedExtensionRequired);
  EXPECT_EQ(code(R"({"asset":{"version":"2.0"},"meshes":[{"primitives":[{"attributes":{}}]}]})"),
            Errc::MalformedGltf);
  auto asset = load_gltf_bytes(apartment(false).glb());
  EXPECT_THROW(extract_triangles(asset, "nope"), Error);
}

TEST(ExtractTriangles, IdentityKeepsLocalCoordinates) {
  Fixture f;
  std::vector<float> pos = {0.5f, 1, 2, 3, 1, 2, 0.5f, 1, 4};
  int m = f.mesh({pos}, {}, 0);
  f.scene({f.node({{"name", "t"}, {"mesh", m}})});
  auto tris = extract_triangles(load_gltf_bytes(f.glb()));
  ASSERT_EQ(tris.size(), 1u);
  for (int v = 0; v < 3; ++v)
    for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(tris[0].v[static_cast<std::size_t>(v)][c], pos[static_cast<std::size_t>(v * 3 + c)]);
}

TEST(ExtractTriangles, ScaleByTwoQuadruplesArea) {
  Fixture f;
  int m = f.mesh({unit_quad()}, {quad_indices()}, 5121);
  int child = f.node({{"name", "quad"}, {"mesh", m}, {"rotation", {0, 0.3826834, 0, 0.9238795}}});
  f.scene({f.node({{"name", "group"}, {"children", {child}}, {"scale", {2, 2, 2}}, {"translation", {5, 1, 0}}})});
  auto asset = load_gltf_bytes(f.glb());
  EXPECT_NEAR(total_area(extract_triangles(asset)), 4.0, 1e-6);
  EXPECT_NEAR(total_area(extract_triangles(asset, "quad")), 4.0, 1e-6);
  for (const auto& t : extract_triangles(asset)) EXPECT_NEAR(t.v[0].y(), 1.0, 1e-6);
}

TEST(ExtractTriangles, HidingDoorRemovesExactlyItsTriangles) {
  auto asset = load_gltf_bytes(apartment(false).glb());
  auto before = extract_triangles(asset);
  auto door = extract_triangles(asset, "apartmentDoor001");
  ASSERT_TRUE(asset.set_visible("apartmentDoor001", false));
  auto after = extract_triangles(asset);
  EXPECT_EQ(before.size() - after.size(), door.size());
  auto b = canonical(before), a = canonical(after), d = canonical(door);
  std::vector<Key> diff;
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(diff));
  EXPECT_EQ(diff, d);
}

TEST(ExtractTriangles, StableUnderNodeOrderPermutation) {
  auto a = load_gltf_bytes(apartment(false).glb());
  auto b = load_gltf_bytes(apartment(true).glb());
  EXPECT_EQ(canonical(extract_triangles(a)), canonical(extract_triangles(b)));
}

TEST(ExtractTriangles, ZUpConversion) {
  Fixture f;
  int m = f.mesh({{0, 0, 0, 1, 0, 0, 0, 1, 0}}, {}, 0);
  f.scene({f.node({{"name", "t"}, {"mesh", m}})});
  auto tris = extract_triangles(load_gltf_bytes(f.glb()), std::nullopt, z_up_to_y_up());
  EXPECT_GT(tris[0].normal().y(), 0.99);
}

TEST(GltfHide, PaperDoorParts) {
  auto asset = load_gltf_bytes(apartment(false).glb());
  auto warnings = apply_gltf_hide(asset, parse_component_map("parts:apartmentDoor001,apartmentDoor002,apartmentDoor"));
  EXPECT_TRUE(warnings.empty());
  for (const char* name : {"apartmentDoor", "apartmentDoor001", "apartmentDoor002"}) EXPECT_FALSE(asset.visible(name));
  EXPECT_TRUE(asset.visible("floor"));
  EXPECT_EQ(extract_triangles(asset).size(), 2u);
}

TEST(GltfHide, UnknownPartsWarnAndEmptyListIsNoop) {
  auto asset = load_gltf_bytes(apartment(false).glb());
  auto original = asset.visibility();
  EXPECT_EQ(apply_gltf_hide(asset, parse_component_map("parts:ghost,apartmentDoor")).size(), 1u);
  EXPECT_FALSE(asset.visible("apartmentDoor"));
  auto fresh = load_gltf_bytes(apartment(false).glb());
  apply_gltf_hide(fresh, parse_component_map("parts:"));
  EXPECT_EQ(fresh.visibility(), original);
  asset.set_visible("apartmentDoor", true);
  EXPECT_EQ(asset.visibility(), original);
}

TEST(GltfHide, VisibilityNeverTouchesGeometry) {
  auto asset = load_gltf_bytes(apartment(false).glb());
  auto meshes_before = asset.meshes();
  apply_gltf_hide(asset, parse_component_map("parts:apartmentDoor001,apartmentDoor002,apartmentDoor"));
  ASSERT_EQ(asset.meshes().size(), meshes_before.size());
  for (std::size_t m = 0; m < meshes_before.size(); ++m)
    for (std::size_t p = 0; p < meshes_before[m].primitives.size(); ++p) {
      EXPECT_EQ(asset.meshes()[m].primitives[p].positions, meshes_before[m].primitives[p].positions);
      EXPECT_EQ(asset.meshes()[m].primitives[p].indices, meshes_before[m].primitives[p].indices);
    }
}

TEST(WriteGlb, RoundTrip) {
  auto asset = load_gltf_bytes(apartment(false).glb());
  auto again = load_gltf_bytes(write_glb(asset));
  EXPECT_EQ(canonical(extract_triangles(asset)), canonical(extract_triangles(again)));
  ASSERT_EQ(again.nodes().size(), asset.nodes().size());
  for (std::size_t i = 0; i < asset.nodes().size(); ++i) EXPECT_EQ(again.nodes()[i].name, asset.nodes()[i].name);
}
