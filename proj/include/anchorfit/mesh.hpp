#pragma once

#include "anchorfit/geometry.hpp"

#include <array>
#include <vector>

namespace anchorfit {

// Triangle mesh. Faces index into vertices; triangles only.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  // Throws InvalidInputError on out-of-range indices / non-finite vertices.
  void validate() const;

  bool empty() const { return vertices.empty(); }
};

}  // namespace anchorfit
