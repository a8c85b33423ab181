#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace escroom {

/// Media type by file extension; application/octet-stream when unknown.
std::string_view media_type(const std::filesystem::path& path);

/// Read-only static file server. Directory requests fall back to index.html.
class StaticServer {
 public:
  explicit StaticServer(std::filesystem::path root);
  ~StaticServer();
  StaticServer(const StaticServer&) = delete;
  StaticServer& operator=(const StaticServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws Io.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace escroom
