#include "escroom/error.hpp"
#include "escroom/gltf.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>

namespace escroom {

using nlohmann::json;

namespace {

constexpr std::uint32_t kGlbMagic = 0x46546C67;  // "glTF"
constexpr std::uint32_t kChunkJson = 0x4E4F534A;
constexpr std::uint32_t kChunkBin = 0x004E4942;

constexpr int kFloat = 5126;
constexpr int kUnsignedByte = 5121;
constexpr int kUnsignedShort = 5123;
constexpr int kUnsignedInt = 5125;

// Extensions that only touch materials, textures or metadata.
const std::set<std::string> kGeometryNeutralExtensions = {
    "KHR_materials_unlit",        "KHR_materials_emissive_strength", "KHR_materials_ior",
    "KHR_materials_specular",     "KHR_materials_transmission",      "KHR_materials_volume",
    "KHR_materials_clearcoat",    "KHR_materials_sheen",             "KHR_texture_transform",
    "KHR_materials_pbrSpecularGlossiness", "KHR_lights_punctual",    "KHR_texture_basisu",
    "EXT_texture_webp",
};

std::string numbered_suffix(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, ".%03d", k);
  return buf;
}

[[noreturn]] void malformed(const std::string& detail) { throw Error(Errc::MalformedGltf, detail); }

std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) malformed("truncated GLB header");
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

std::vector<std::uint8_t> decode_base64(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  unsigned acc = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=') break;
    int v = value(c);
    if (v < 0) {
      if (c == '\n' || c == '\r' || c == ' ') continue;
      malformed("invalid base64 data URI");
    }
    acc = (acc << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Loader {
 public:
  Loader(json doc, std::vector<std::uint8_t> bin, std::filesystem::path base)
      : doc_(std::move(doc)), glb_bin_(std::move(bin)), base_(std::move(base)) {}

  Asset load() {
    check_extensions();
    load_buffers();
    Asset asset;
    load_meshes(asset);
    load_nodes(asset);
    return asset;
  }

 private:
  void check_extensions() {
    if (!doc_.contains("asset") || !doc_["asset"].is_object()) malformed("missing 'asset' object");
    std::string version = doc_["asset"].value("version", "");
    if (version.rfind("2.", 0) != 0) malformed("unsupported GLTF version '" + version + "'");
    if (doc_.contains("extensionsRequired")) {
      for (const auto& ext : doc_["extensionsRequired"]) {
        std::string name = ext.get<std::string>();
        if (!kGeometryNeutralExtensions.count(name)) throw Error(Errc::UnsupportedExtensionRequired, name);
      }
    }
  }

  void load_buffers() {
    if (!doc_.contains("buffers")) return;
    for (std::size_t i = 0; i < doc_["buffers"].size(); ++i) {
      const json& b = doc_["buffers"][i];
      std::size_t length = b.value("byteLength", std::size_t{0});
      std::vector<std::uint8_t> data;
      if (!b.contains("uri")) {
        if (i != 0 || glb_bin_.empty()) malformed("buffer " + std::to_string(i) + " has no data");
        data = glb_bin_;
      } else {
        std::string uri = b["uri"].get<std::string>();
        if (uri.rfind("data:", 0) == 0) {
          std::size_t comma = uri.find(',');
          if (comma == std::string::npos || uri.substr(0, comma).find(";base64") == std::string::npos) {
            malformed("unsupported data URI in buffer " + std::to_string(i));
          }
          data = decode_base64(std::string_view(uri).substr(comma + 1));
        } else {
          data = read_file(base_ / uri);
        }
      }
      if (data.size() < length) malformed("buffer " + std::to_string(i) + " shorter than byteLength");
      buffers_.push_back(std::move(data));
    }
  }

  struct View {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t stride;
  };

  View accessor_view(int index, std::size_t element_size, std::size_t& count, int& component_type) {
    const json& accessors = doc_.at("accessors");
    if (index < 0 || static_cast<std::size_t>(index) >= accessors.size()) malformed("accessor index out of range");
    const json& a = accessors[static_cast<std::size_t>(index)];
    if (a.contains("sparse")) malformed("sparse accessors are not supported");
    count = a.at("count").get<std::size_t>();
    component_type = a.at("componentType").get<int>();
    if (!a.contains("bufferView")) malformed("accessor without bufferView");
    const json& bv = doc_.at("bufferViews").at(a["bufferView"].get<std::size_t>());
    std::size_t buffer = bv.at("buffer").get<std::size_t>();
    if (buffer >= buffers_.size()) malformed("bufferView references missing buffer");
    std::size_t view_offset = bv.value("byteOffset", std::size_t{0});
    std::size_t view_length = bv.at("byteLength").get<std::size_t>();
    std::size_t stride = bv.value("byteStride", element_size);
    std::size_t offset = a.value("byteOffset", std::size_t{0});
    const auto& data = buffers_[buffer];
    if (view_offset + view_length > data.size()) malformed("bufferView exceeds buffer");
    if (count > 0 && offset + stride * (count - 1) + element_size > view_length) {
      malformed("accessor " + std::to_string(index) + " exceeds its bufferView");
    }
    return {data.data() + view_offset + offset, view_length - offset, stride};
  }

  std::vector<Eigen::Vector3f> read_positions(int index) {
    std::size_t count = 0;
    int type = 0;
    if (doc_.at("accessors").at(static_cast<std::size_t>(index)).value("type", "") != "VEC3") {
      malformed("POSITION accessor must be VEC3");
    }
    View v = accessor_view(index, 12, count, type);
    if (type != kFloat) malformed("POSITION accessor must be FLOAT");
    std::vector<Eigen::Vector3f> out(count);
    for (std::size_t i = 0; i < count; ++i) std::memcpy(out[i].data(), v.data + i * v.stride, 12);
    return out;
  }

  std::vector<std::uint32_t> read_indices(int index) {
    std::size_t count = 0;
    int type = 0;
    const json& a = doc_.at("accessors").at(static_cast<std::size_t>(index));
    int declared = a.at("componentType").get<int>();
    std::size_t size = declared == kUnsignedByte ? 1 : declared == kUnsignedShort ? 2 : 4;
    View v = accessor_view(index, size, count, type);
    std::vector<std::uint32_t> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint8_t* p = v.data + i * v.stride;
      switch (type) {
        case kUnsignedByte: out[i] = *p; break;
        case kUnsignedShort: {
          std::uint16_t s;
          std::memcpy(&s, p, 2);
          out[i] = s;
          break;
        }
        case kUnsignedInt: std::memcpy(&out[i], p, 4); break;
        default: malformed("invalid index componentType " + std::to_string(type));
      }
    }
    return out;
  }

  void load_meshes(Asset& asset) {
    if (!doc_.contains("meshes")) return;
    for (const auto& m : doc_["meshes"]) {
      GltfMesh mesh;
      mesh.name = m.value("name", "");
      for (const auto& p : m.at("primitives")) {
        int mode = p.value("mode", 4);
        if (mode < 4 || mode > 6) continue;  // points and lines carry no surface
        if (!p.contains("attributes") || !p["attributes"].contains("POSITION")) {
          malformed("primitive without POSITION");
        }
        GltfPrimitive prim;
        prim.positions = read_positions(p["attributes"]["POSITION"].get<int>());
        std::vector<std::uint32_t> idx;
        if (p.contains("indices")) {
          idx = read_indices(p["indices"].get<int>());
        } else {
          idx.resize(prim.positions.size());
          for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
        }
        for (auto i : idx) {
          if (i >= prim.positions.size()) malformed("index out of range");
        }
        if (mode == 4) {
          idx.resize(idx.size() - idx.size() % 3);
          prim.indices = std::move(idx);
        } else if (mode == 5) {
          for (std::size_t i = 2; i < idx.size(); ++i) {
            if (i % 2 == 0) prim.indices.insert(prim.indices.end(), {idx[i - 2], idx[i - 1], idx[i]});
            else prim.indices.insert(prim.indices.end(), {idx[i - 1], idx[i - 2], idx[i]});
          }
        } else {
          for (std::size_t i = 2; i < idx.size(); ++i) prim.indices.insert(prim.indices.end(), {idx[0], idx[i - 1], idx[i]});
        }
        mesh.primitives.push_back(std::move(prim));
      }
      asset.add_mesh(std::move(mesh));
    }
  }

  static Transform node_transform(const json& n) {
    Transform t = Transform::Identity();
    if (n.contains("matrix")) {
      const auto& m = n["matrix"];
      if (m.size() != 16) malformed("node matrix must have 16 entries");
      Eigen::Matrix4d mat;
      for (int c = 0; c < 4; ++c) {
        for (int r = 0; r < 4; ++r) mat(r, c) = m[static_cast<std::size_t>(c * 4 + r)].get<double>();
      }
      t.matrix() = mat;
      return t;
    }
    if (n.contains("translation")) {
      const auto& v = n["translation"];
      t.translate(Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()));
    }
    if (n.contains("rotation")) {
      const auto& q = n["rotation"];
      t.rotate(Eigen::Quaterniond(q.at(3).get<double>(), q.at(0).get<double>(), q.at(1).get<double>(),
                                  q.at(2).get<double>())
                   .normalized());
    }
    if (n.contains("scale")) {
      const auto& s = n["scale"];
      t.scale(Vec3(s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()));
    }
    return t;
  }

  void load_nodes(Asset& asset) {
    if (!doc_.contains("nodes")) return;
    const json& nodes = doc_["nodes"];
    std::vector<int> parent(nodes.size(), -1);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i].contains("children")) continue;
      for (const auto& c : nodes[i]["children"]) {
        std::size_t ci = c.get<std::size_t>();
        if (ci >= nodes.size() || parent[ci] != -1 || ci == i) malformed("invalid node hierarchy");
        parent[ci] = static_cast<int>(i);
      }
    }

    std::vector<std::size_t> roots;
    if (doc_.contains("scenes") && !doc_["scenes"].empty()) {
      std::size_t scene = doc_.value("scene", std::size_t{0});
      for (const auto& r : doc_["scenes"].at(scene).value("nodes", json::array())) roots.push_back(r.get<std::size_t>());
    } else {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (parent[i] == -1) roots.push_back(i);
      }
    }

    // breadth-first so parents are added before children; names assigned in
    // source index order to keep suffixes stable
    std::vector<std::string> names(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) names[i] = nodes[i].value("name", "node" + std::to_string(i));
    std::vector<int> mapped(nodes.size(), -1);
    std::vector<std::size_t> queue;
    for (auto r : roots) {
      if (r >= nodes.size()) malformed("scene references missing node");
      if (parent[r] != -1) malformed("scene root has a parent");
      queue.push_back(r);
    }
    std::set<std::size_t> visited;
    // keep original index order among all reachable nodes for naming
    std::vector<std::size_t> order;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      std::size_t i = queue[qi];
      if (!visited.insert(i).second) malformed("node cycle");
      order.push_back(i);
      for (const auto& c : nodes[i].value("children", json::array())) queue.push_back(c.get<std::size_t>());
    }
    std::vector<std::size_t> by_index = order;
    std::sort(by_index.begin(), by_index.end());
    std::map<std::size_t, std::string> final_names;
    {
      std::set<std::string> used;
      for (auto i : by_index) {
        std::string name = names[i];
        for (int k = 1; used.count(name); ++k) name = names[i] + numbered_suffix(k);
        used.insert(name);
        final_names[i] = name;
      }
    }
    std::size_t mesh_count = asset.meshes().size();
    for (auto i : order) {
      const json& n = nodes[i];
      std::optional<int> mesh;
      if (n.contains("mesh")) {
        int m = n["mesh"].get<int>();
        if (m < 0 || static_cast<std::size_t>(m) >= mesh_count) malformed("node references missing mesh");
        mesh = m;
      }
      int p = parent[i] == -1 ? -1 : mapped[static_cast<std::size_t>(parent[i])];
      mapped[i] = asset.add_node(final_names[i], p, node_transform(n), mesh);
    }
  }

  json doc_;
  std::vector<std::uint8_t> glb_bin_;
  std::filesystem::path base_;
  std::vector<std::vector<std::uint8_t>> buffers_;
};

void collect(const Asset& asset, int id, const Transform& parent, std::vector<Triangle>& out) {
  const GltfNode& node = asset.nodes()[static_cast<std::size_t>(id)];
  if (!asset.visible(node.name)) return;
  Transform world = parent * node.local;
  if (node.mesh) {
    for (const auto& prim : asset.meshes()[static_cast<std::size_t>(*node.mesh)].primitives) {
      for (std::size_t i = 0; i + 2 < prim.indices.size(); i += 3) {
        Triangle t;
        for (int k = 0; k < 3; ++k) {
          t.v[static_cast<std::size_t>(k)] = world * prim.positions[prim.indices[i + static_cast<std::size_t>(k)]].cast<double>();
        }
        out.push_back(t);
      }
    }
  }
  for (int c : node.children) collect(asset, c, world, out);
}

void pad_to_4(std::vector<std::uint8_t>& v, std::uint8_t fill) {
  while (v.size() % 4) v.push_back(fill);
}

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  std::uint8_t b[4];
  std::memcpy(b, &x, 4);
  v.insert(v.end(), b, b + 4);
}

}  // namespace

std::optional<int> Asset::find_node(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

bool Asset::visible(std::string_view name) const {
  auto it = visibility_.find(name);
  return it == visibility_.end() || it->second;
}

bool Asset::set_visible(std::string_view name, bool visible) {
  auto it = visibility_.find(name);
  if (it == visibility_.end()) return false;
  it->second = visible;
  return true;
}

std::size_t Asset::triangle_count() const {
  std::size_t n = 0;
  for (const auto& m : meshes_) {
    for (const auto& p : m.primitives) n += p.indices.size() / 3;
  }
  return n;
}

int Asset::add_mesh(GltfMesh mesh) {
  meshes_.push_back(std::move(mesh));
  return static_cast<int>(meshes_.size() - 1);
}

int Asset::add_node(std::string name, int parent, const Transform& local, std::optional<int> mesh) {
  if (name.empty()) name = "node" + std::to_string(nodes_.size());
  std::string unique = name;
  for (int k = 1; by_name_.count(unique); ++k) unique = name + numbered_suffix(k);
  int id = static_cast<int>(nodes_.size());
  GltfNode node;
  node.name = unique;
  node.parent = parent;
  node.local = local;
  node.mesh = mesh;
  nodes_.push_back(std::move(node));
  if (parent >= 0) nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
  else roots_.push_back(id);
  by_name_.emplace(unique, id);
  visibility_.emplace(unique, true);
  return id;
}

Asset load_gltf_bytes(std::span<const std::uint8_t> bytes, const std::filesystem::path& base_dir) {
  json doc;
  std::vector<std::uint8_t> bin;
  try {
    if (bytes.size() >= 12 && read_u32(bytes, 0) == kGlbMagic) {
      std::uint32_t version = read_u32(bytes, 4);
      std::uint32_t total = read_u32(bytes, 8);
      if (version != 2) malformed("unsupported GLB version " + std::to_string(version));
      if (total > bytes.size()) malformed("GLB length exceeds data");
      std::size_t offset = 12;
      bool have_json = false;
      while (offset + 8 <= total) {
        std::uint32_t len = read_u32(bytes, offset);
        std::uint32_t type = read_u32(bytes, offset + 4);
        offset += 8;
        if (offset + len > total) malformed("GLB chunk exceeds container");
        auto chunk = bytes.subspan(offset, len);
        if (type == kChunkJson) {
          doc = json::parse(chunk.begin(), chunk.end());
          have_json = true;
        } else if (type == kChunkBin && bin.empty()) {
          bin.assign(chunk.begin(), chunk.end());
        }
        offset += len;
      }
      if (!have_json) malformed("GLB without JSON chunk");
    } else {
      doc = json::parse(bytes.begin(), bytes.end());
    }
    return Loader(std::move(doc), std::move(bin), base_dir).load();
  } catch (const json::exception& e) {
    malformed(e.what());
  }
}

Asset load_gltf(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return load_gltf_bytes(bytes, path.parent_path());
}

std::vector<Triangle> extract_triangles(const Asset& asset, std::optional<std::string_view> root_node,
                                        const Transform& world) {
  std::vector<Triangle> out;
  if (root_node) {
    auto id = asset.find_node(*root_node);
    if (!id) throw Error(Errc::UnknownNode, std::string(*root_node));
    Transform parent = world;
    std::vector<int> chain;
    for (int p = asset.nodes()[static_cast<std::size_t>(*id)].parent; p != -1;
         p = asset.nodes()[static_cast<std::size_t>(p)].parent) {
      chain.push_back(p);
    }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const GltfNode& n = asset.nodes()[static_cast<std::size_t>(*it)];
      if (!asset.visible(n.name)) return out;
      parent = parent * n.local;
    }
    collect(asset, *id, parent, out);
    return out;
  }
  for (int r : asset.roots()) collect(asset, r, world, out);
  return out;
}

std::vector<std::string> apply_gltf_hide(Asset& asset, const ComponentMap& spec) {
  std::vector<std::string> warnings;
  auto parts = spec.get_list("parts");
  if (!parts) {
    warnings.push_back("gltf-hide without 'parts'");
    return warnings;
  }
  for (const auto& part : *parts) {
    if (part.empty()) continue;
    if (!asset.set_visible(part, false)) warnings.push_back("gltf-hide: no node named '" + part + "'");
  }
  return warnings;
}

std::vector<std::uint8_t> write_glb(const Asset& asset) {
  json doc;
  doc["asset"] = {{"version", "2.0"}, {"generator", "escroom"}};
  std::vector<std::uint8_t> bin;
  json accessors = json::array();
  json views = json::array();
  json meshes = json::array();

  auto add_view = [&](const void* data, std::size_t size, int target) {
    pad_to_4(bin, 0);
    std::size_t offset = bin.size();
    const auto* p = static_cast<const std::uint8_t*>(data);
    bin.insert(bin.end(), p, p + size);
    views.push_back({{"buffer", 0}, {"byteOffset", offset}, {"byteLength", size}, {"target", target}});
    return views.size() - 1;
  };

  for (const auto& mesh : asset.meshes()) {
    json prims = json::array();
    for (const auto& prim : mesh.primitives) {
      Eigen::Vector3f lo = Eigen::Vector3f::Constant(0), hi = Eigen::Vector3f::Constant(0);
      if (!prim.positions.empty()) {
        lo = hi = prim.positions.front();
        for (const auto& p : prim.positions) {
          lo = lo.cwiseMin(p);
          hi = hi.cwiseMax(p);
        }
      }
      std::size_t pv = add_view(prim.positions.data(), prim.positions.size() * 12, 34962);
      accessors.push_back({{"bufferView", pv},
                           {"componentType", kFloat},
                           {"count", prim.positions.size()},
                           {"type", "VEC3"},
                           {"min", {lo.x(), lo.y(), lo.z()}},
                           {"max", {hi.x(), hi.y(), hi.z()}}});
      std::size_t pos_accessor = accessors.size() - 1;
      std::size_t iv = add_view(prim.indices.data(), prim.indices.size() * 4, 34963);
      accessors.push_back(
          {{"bufferView", iv}, {"componentType", kUnsignedInt}, {"count", prim.indices.size()}, {"type", "SCALAR"}});
      prims.push_back({{"attributes", {{"POSITION", pos_accessor}}}, {"indices", accessors.size() - 1}, {"mode", 4}});
    }
    json m = {{"primitives", prims}};
    if (!mesh.name.empty()) m["name"] = mesh.name;
    meshes.push_back(m);
  }

  json nodes = json::array();
  for (const auto& n : asset.nodes()) {
    json jn = {{"name", n.name}};
    if (!n.local.matrix().isIdentity(0.0)) {
      json m = json::array();
      for (int c = 0; c < 4; ++c) {
        for (int r = 0; r < 4; ++r) m.push_back(n.local.matrix()(r, c));
      }
      jn["matrix"] = m;
    }
    if (n.mesh) jn["mesh"] = *n.mesh;
    if (!n.children.empty()) jn["children"] = n.children;
    nodes.push_back(jn);
  }

  doc["scene"] = 0;
  doc["scenes"] = json::array({{{"nodes", asset.roots()}}});
  doc["nodes"] = nodes;
  if (!meshes.empty()) doc["meshes"] = meshes;
  if (!accessors.empty()) {
    doc["accessors"] = accessors;
    doc["bufferViews"] = views;
  }
  pad_to_4(bin, 0);
  if (!bin.empty()) doc["buffers"] = json::array({{{"byteLength", bin.size()}}});

  std::string text = doc.dump();
  std::vector<std::uint8_t> json_chunk(text.begin(), text.end());
  pad_to_4(json_chunk, ' ');

  std::vector<std::uint8_t> out;
  put_u32(out, kGlbMagic);
  put_u32(out, 2);
  put_u32(out, static_cast<std::uint32_t>(12 + 8 + json_chunk.size() + (bin.empty() ? 0 : 8 + bin.size())));
  put_u32(out, static_cast<std::uint32_t>(json_chunk.size()));
  put_u32(out, kChunkJson);
  out.insert(out.end(), json_chunk.begin(), json_chunk.end());
  if (!bin.empty()) {
    put_u32(out, static_cast<std::uint32_t>(bin.size()));
    put_u32(out, kChunkBin);
    out.insert(out.end(), bin.begin(), bin.end());
  }
  return out;
}

Transform z_up_to_y_up() {
  Transform t = Transform::Identity();
  t.rotate(Eigen::AngleAxisd(-std::numbers::pi / 2.0, Vec3::UnitX()));
  return t;
}

}  // namespace escroom
