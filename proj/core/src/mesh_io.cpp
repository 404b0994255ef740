#include "helfrich/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace helfrich {

namespace {

/// Next non-empty line with '#' comments stripped.
bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

void append_polygon(TriangleMesh& mesh, const std::vector<int>& poly, std::size_t line_no) {
  if (poly.size() < 3) {
    std::ostringstream os;
    os << "polygon with fewer than 3 vertices near line " << line_no;
    throw MeshError(os.str());
  }
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
  }
}

}  // namespace

std::optional<MeshFormat> format_from_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".obj") return MeshFormat::Obj;
  return std::nullopt;
}

TriangleMesh read_off(std::istream& in) {
  std::string line;
  if (!next_content_line(in, line)) throw MeshError("OFF: empty input");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "OFF") throw MeshError("OFF: missing 'OFF' header");

  long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv >> nf)) {
    if (!next_content_line(in, line)) throw MeshError("OFF: missing element counts");
    std::istringstream counts(line);
    if (!(counts >> nv >> nf)) throw MeshError("OFF: malformed element counts");
    counts >> ne;
  }
  if (nv < 0 || nf < 0) throw MeshError("OFF: negative element counts");

  TriangleMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nv));
  std::size_t line_no = 0;
  for (long i = 0; i < nv; ++i) {
    if (!next_content_line(in, line)) throw MeshError("OFF: unexpected end of vertex list");
    ++line_no;
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) {
      std::ostringstream os;
      os << "OFF: malformed vertex " << i;
      throw MeshError(os.str());
    }
    mesh.vertices.push_back(p);
  }
  for (long i = 0; i < nf; ++i) {
    if (!next_content_line(in, line)) throw MeshError("OFF: unexpected end of face list");
    ++line_no;
    std::istringstream ls(line);
    int count = 0;
    if (!(ls >> count) || count < 3) {
      std::ostringstream os;
      os << "OFF: malformed face " << i;
      throw MeshError(os.str());
    }
    std::vector<int> poly(static_cast<std::size_t>(count));
    for (int& v : poly) {
      if (!(ls >> v)) {
        std::ostringstream os;
        os << "OFF: face " << i << " has too few indices";
        throw MeshError(os.str());
      }
    }
    append_polygon(mesh, poly, line_no);
  }
  return mesh;
}

TriangleMesh read_obj(std::istream& in) {
  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        std::ostringstream os;
        os << "OBJ: malformed vertex on line " << line_no;
        throw MeshError(os.str());
      }
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      while (ls >> token) {
        const auto slash = token.find('/');
        const std::string idx = token.substr(0, slash);
        int value = 0;
        try {
          value = std::stoi(idx);
        } catch (const std::exception&) {
          std::ostringstream os;
          os << "OBJ: malformed face index '" << token << "' on line " << line_no;
          throw MeshError(os.str());
        }
        // 1-based; negative values are relative to the end.
        value = value > 0 ? value - 1 : static_cast<int>(mesh.vertices.size()) + value;
        poly.push_back(value);
      }
      append_polygon(mesh, poly, line_no);
    }
  }
  if (mesh.vertices.empty()) throw MeshError("OBJ: no vertices");
  return mesh;
}

void write_off(std::ostream& out, const TriangleMesh& mesh) {
  out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
  out << std::setprecision(17);
  for (const Vec3& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const Face& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  out << std::setprecision(17);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const Face& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

TriangleMesh load_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format,
                       const ValidationOptions& options) {
  if (!format) format = format_from_extension(path);
  if (!format) throw MeshError("cannot infer mesh format from extension of " + path.string());
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file " + path.string());
  TriangleMesh mesh = *format == MeshFormat::Off ? read_off(in) : read_obj(in);
  mesh = repair_orientation(mesh);
  validate_mesh(mesh, options);
  return mesh;
}

void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh, std::optional<MeshFormat> format) {
  if (!format) format = format_from_extension(path);
  if (!format) throw MeshError("cannot infer mesh format from extension of " + path.string());
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file " + path.string());
  if (*format == MeshFormat::Off) {
    write_off(out, mesh);
  } else {
    write_obj(out, mesh);
  }
  if (!out) throw MeshError("write failed for " + path.string());
}

}  // namespace helfrich
