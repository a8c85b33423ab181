#pragma once

#include "escroom/geometry.hpp"
#include "escroom/markup.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace escroom {

struct GltfPrimitive {
  std::vector<Eigen::Vector3f> positions;
  std::vector<std::uint32_t> indices;  // triangle list, 3 per triangle
};

struct GltfMesh {
  std::string name;
  std::vector<GltfPrimitive> primitives;
};

struct GltfNode {
  std::string name;  // unique within the asset
  int parent = -1;
  std::vector<int> children;
  Transform local = Transform::Identity();
  std::optional<int> mesh;
};

/// Node hierarchy + triangle meshes of a GLTF 2.0 file. Geometry is
/// immutable after load; only the per-node visibility map changes.
class Asset {
 public:
  const std::vector<GltfNode>& nodes() const { return nodes_; }
  const std::vector<GltfMesh>& meshes() const { return meshes_; }
  const std::vector<int>& roots() const { return roots_; }

  std::optional<int> find_node(std::string_view name) const;
  bool visible(std::string_view name) const;
  /// Returns false when no node carries the name.
  bool set_visible(std::string_view name, bool visible);
  const std::map<std::string, bool, std::less<>>& visibility() const { return visibility_; }

  std::size_t triangle_count() const;

  /// Builder API used by loaders, tests and the demo generator. Names are
  /// disambiguated with `.001`-style suffixes.
  int add_mesh(GltfMesh mesh);
  int add_node(std::string name, int parent, const Transform& local, std::optional<int> mesh = {});

 private:
  std::vector<GltfNode> nodes_;
  std::vector<GltfMesh> meshes_;
  std::vector<int> roots_;
  std::map<std::string, int, std::less<>> by_name_;
  std::map<std::string, bool, std::less<>> visibility_;
};

Asset load_gltf(const std::filesystem::path& path);
/// Parses `.glb` or `.gltf` bytes; relative buffer URIs resolve against `base_dir`.
Asset load_gltf_bytes(std::span<const std::uint8_t> bytes, const std::filesystem::path& base_dir = {});

/// World-space triangles below `root_node` (all scene roots when empty).
/// `world` is applied on top of the node hierarchy. Hidden nodes and their
/// subtrees are skipped.
std::vector<Triangle> extract_triangles(const Asset& asset, std::optional<std::string_view> root_node = {},
                                        const Transform& world = Transform::Identity());

/// Hides every node named in the `parts` list. Unknown names are returned as
/// warnings.
std::vector<std::string> apply_gltf_hide(Asset& asset, const ComponentMap& spec);

/// Serializes geometry and hierarchy as a binary GLTF container.
std::vector<std::uint8_t> write_glb(const Asset& asset);

/// Fixed rotation taking z-up source data to the y-up engine frame.
Transform z_up_to_y_up();

}  // namespace escroom
