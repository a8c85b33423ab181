// Writes the demo models: apartment.glb (two rooms joined by a doorway, three
// door leaves named as in the demo scene) and watch.glb.
//
//   make_demo_assets [out_dir]
#include "escroom/gltf.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using escroom::Asset;
using escroom::GltfMesh;
using escroom::GltfPrimitive;
using escroom::Transform;

// Axis-aligned box between lo and hi, as a node translated to its centre.
int add_box(Asset& asset, const std::string& name, Eigen::Vector3d lo, Eigen::Vector3d hi) {
  Eigen::Vector3d c = (lo + hi) / 2;
  Eigen::Vector3f h = ((hi - lo) / 2).cast<float>();
  GltfPrimitive prim;
  for (int i = 0; i < 8; ++i) prim.positions.push_back({i & 1 ? h.x() : -h.x(), i & 2 ? h.y() : -h.y(), i & 4 ? h.z() : -h.z()});
  static constexpr std::array<std::uint32_t, 36> kFaces{2, 6, 7, 2, 7, 3, 0, 1, 5, 0, 5, 4, 1, 3, 7, 1, 7, 5,
                                                        0, 4, 6, 0, 6, 2, 4, 5, 7, 4, 7, 6, 0, 2, 3, 0, 3, 1};
  prim.indices.assign(kFaces.begin(), kFaces.end());
  int mesh = asset.add_mesh(GltfMesh{name, {prim}});
  Transform t = Transform::Identity();
  t.translate(c);
  return asset.add_node(name, -1, t, mesh);
}

Asset apartment() {
  Asset a;
  const double h = 2.6, t = 0.2, door_h = 2.1;
  add_box(a, "floor", {0, -0.1, 0}, {10, 0, 6});
  // exterior walls; front door gap x 1..2 on the south side, exit gap z 4..5 on the east side
  add_box(a, "wallSouthA", {-t, 0, -t}, {1, h, 0});
  add_box(a, "wallSouthB", {2, 0, -t}, {10 + t, h, 0});
  add_box(a, "wallNorth", {-t, 0, 6}, {10 + t, h, 6 + t});
  add_box(a, "wallWest", {-t, 0, 0}, {0, h, 6});
  add_box(a, "wallEastA", {10, 0, 0}, {10 + t, h, 4});
  add_box(a, "wallEastB", {10, 0, 5}, {10 + t, h, 6});
  // dividing wall with a 1 m doorway at z 2.5..3.5
  add_box(a, "wallInnerA", {4.9, 0, 0}, {5.1, h, 2.5});
  add_box(a, "wallInnerB", {4.9, 0, 3.5}, {5.1, h, 6});
  add_box(a, "table", {1.5, 0, 2.5}, {2.5, 0.75, 3.5});
  add_box(a, "apartmentDoor", {1, 0, -0.15}, {2, door_h, -0.05});
  add_box(a, "apartmentDoor001", {4.95, 0, 2.5}, {5.05, door_h, 3.5});
  add_box(a, "apartmentDoor002", {10.05, 0, 4}, {10.15, door_h, 5});
  return a;
}

Asset watch() {
  Asset a;
  add_box(a, "watchBody", {-0.02, -0.005, -0.02}, {0.02, 0.005, 0.02});
  return a;
}

void write(const std::filesystem::path& path, const Asset& asset) {
  auto bytes = escroom::write_glb(asset);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "demo";
  try {
    std::filesystem::create_directories(dir);
    write(dir / "apartment.glb", apartment());
    write(dir / "watch.glb", watch());
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
