#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "helfrich/mesh.hpp"

namespace helfrich {

enum class MeshFormat { Off, Obj };

/// Format from the file extension (.off / .obj, case-insensitive).
std::optional<MeshFormat> format_from_extension(const std::filesystem::path& path);

/// Raw parse: polygons are fan-triangulated, nothing else is checked.
TriangleMesh read_off(std::istream& in);
TriangleMesh read_obj(std::istream& in);

/// Positions are written with 17 significant digits so a write/read cycle
/// reproduces every double exactly.
void write_off(std::ostream& out, const TriangleMesh& mesh);
void write_obj(std::ostream& out, const TriangleMesh& mesh);

/// Parse, repair winding per component, orient for positive volume and
/// validate. Throws MeshError (parse failure, non-manifold, open boundary,
/// non-orientable, degenerate face).
TriangleMesh load_mesh(const std::filesystem::path& path,
                       std::optional<MeshFormat> format = std::nullopt,
                       const ValidationOptions& options = {});

void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh,
               std::optional<MeshFormat> format = std::nullopt);

}  // namespace helfrich
