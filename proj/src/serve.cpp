#include "escroom/serve.hpp"

#include "escroom/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <array>
#include <utility>

namespace escroom {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 18> kMediaTypes{{
    {"html", "text/html"},
    {"htm", "text/html"},
    {"css", "text/css"},
    {"js", "text/javascript"},
    {"mjs", "text/javascript"},
    {"json", "application/json"},
    {"wasm", "application/wasm"},
    {"glb", "model/gltf-binary"},
    {"gltf", "model/gltf+json"},
    {"bin", "application/octet-stream"},
    {"png", "image/png"},
    {"jpg", "image/jpeg"},
    {"jpeg", "image/jpeg"},
    {"svg", "image/svg+xml"},
    {"ktx2", "image/ktx2"},
    {"mp3", "audio/mpeg"},
    {"ogg", "audio/ogg"},
    {"txt", "text/plain"},
}};

}  // namespace

std::string_view media_type(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  if (!ext.empty()) ext.erase(0, 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& [e, type] : kMediaTypes) {
    if (e == ext) return type;
  }
  return "application/octet-stream";
}

struct StaticServer::Impl {
  std::filesystem::path root;
  httplib::Server server;
};

StaticServer::StaticServer(std::filesystem::path root) : impl_(std::make_unique<Impl>()) {
  impl_->root = std::move(root);
  if (!std::filesystem::is_directory(impl_->root)) {
    throw Error(Errc::Io, impl_->root.string() + " is not a directory");
  }
  for (const auto& [e, type] : kMediaTypes) {
    impl_->server.set_file_extension_and_mimetype_mapping(std::string(e), std::string(type));
  }
  if (!impl_->server.set_mount_point("/", impl_->root.string())) {
    throw Error(Errc::Io, "cannot serve " + impl_->root.string());
  }
  impl_->server.Get(".*", [](const httplib::Request&, httplib::Response& res) {
    res.status = 404;
    res.set_content("not found\n", "text/plain");
  });
  impl_->server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(std::to_string(res.status) + "\n", "text/plain");
  });
}

StaticServer::~StaticServer() { stop(); }

int StaticServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(Errc::Io, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void StaticServer::run() { impl_->server.listen_after_bind(); }

void StaticServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace escroom
