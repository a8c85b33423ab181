#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace escroom {

enum class Errc {
  // scene markup
  UnbalancedTag,
  DuplicateId,
  MalformedAttribute,
  EmptyKey,
  InvalidSelector,
  // statechart
  UnknownRoom,
  DuplicateStateName,
  MissingType,
  InvalidStateName,
  MissingStateKey,
  UnknownStatePath,
  // navmesh
  NoWalkableSurface,
  InvalidAgentParams,
  PrevOffMesh,
  PointOffMesh,
  UnknownBlocker,
  // gltf
  MalformedGltf,
  UnsupportedExtensionRequired,
  UnknownNode,
  // panels
  UnsupportedElement,
  PanelTooNarrow,
  // runtime
  MissingSpawn,
  PuzzleWithoutPosition,
  MissingAsset,
  InvalidScript,
  InvalidArgument,
  Io,
};

std::string_view to_string(Errc code) noexcept;

/// Error raised by every escroom module. `line` is the 1-based source line
/// when the error originates in a markup file, 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail, int line = 0);

  Errc code() const noexcept { return code_; }
  int line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  int line_;
  std::string detail_;
};

}  // namespace escroom
