#include "tfem/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>

namespace tfem {

MeshFormatError::MeshFormatError(Kind kind, int line, const std::string& what)
    : ValidationError("tfmesh line " + std::to_string(line) + ": " + what), kind_(kind), line_(line) {}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

using Kind = MeshFormatError::Kind;

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next non-blank, non-comment line split on whitespace; false at EOF.
  bool next(std::vector<std::string_view>& tokens) {
    while (std::getline(in_, buf_)) {
      ++line_;
      tokens.clear();
      std::size_t i = 0;
      while (i < buf_.size()) {
        while (i < buf_.size() && std::isspace(static_cast<unsigned char>(buf_[i]))) ++i;
        std::size_t j = i;
        while (j < buf_.size() && !std::isspace(static_cast<unsigned char>(buf_[j]))) ++j;
        if (j > i) tokens.emplace_back(buf_.data() + i, j - i);
        i = j;
      }
      if (tokens.empty() || tokens[0].front() == '#') continue;
      return true;
    }
    ++line_;
    return false;
  }

  int line() const { return line_; }

 private:
  std::istream& in_;
  std::string buf_;
  int line_ = 0;
};

template <class T>
bool parse(std::string_view s, T& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::int64_t section(LineReader& r, std::vector<std::string_view>& tok, const char* name) {
  if (!r.next(tok)) throw MeshFormatError(Kind::truncated, r.line(), std::string("missing '") + name + "' section");
  std::int64_t n = 0;
  if (tok.size() != 2 || tok[0] != name || !parse(tok[1], n) || n < 0) {
    throw MeshFormatError(Kind::malformed, r.line(), std::string("expected '") + name + " <count>'");
  }
  return n;
}

void record(LineReader& r, std::vector<std::string_view>& tok, std::size_t fields, const char* what) {
  if (!r.next(tok)) throw MeshFormatError(Kind::truncated, r.line(), std::string("file ends inside the ") + what);
  if (tok.size() != fields) {
    throw MeshFormatError(Kind::malformed, r.line(),
                          std::string("expected ") + std::to_string(fields) + " fields in the " + what);
  }
}

Index vertex_index(LineReader& r, std::string_view s, Index nv, const char* what) {
  std::int64_t v = 0;
  if (!parse(s, v)) throw MeshFormatError(Kind::malformed, r.line(), std::string("bad vertex index in ") + what);
  if (v < 0 || v >= nv) {
    throw MeshFormatError(Kind::index_out_of_range, r.line(),
                          std::string(what) + " references vertex " + std::to_string(v) + " but the mesh has " +
                              std::to_string(nv) + " vertices");
  }
  return static_cast<Index>(v);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open '" + path + "' for writing");
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open '" + path + "'");
  return f;
}

}  // namespace

void write_mesh(const Mesh& mesh, std::ostream& out) {
  out << "tfmesh 1\n";
  out << "vertices " << mesh.num_vertices() << '\n';
  for (const Vec3& x : mesh.vertices())
    out << format_double(x[0]) << ' ' << format_double(x[1]) << ' ' << format_double(x[2]) << '\n';
  out << "cells " << mesh.num_cells() << '\n';
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const Cell& k = mesh.cell(c);
    out << k[0] << ' ' << k[1] << ' ' << k[2] << ' ' << k[3] << ' ' << mesh.cell_region()[c] << '\n';
  }
  // sorted for deterministic output
  std::vector<std::pair<FacetKey, int>> facets(mesh.facet_tags().begin(), mesh.facet_tags().end());
  std::sort(facets.begin(), facets.end());
  out << "facets " << facets.size() << '\n';
  for (const auto& [key, tag] : facets) out << key[0] << ' ' << key[1] << ' ' << key[2] << ' ' << tag << '\n';
  if (!out) throw ValidationError("write_mesh: stream error");
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  auto f = open_out(path);
  write_mesh(mesh, f);
}

Mesh read_mesh(std::istream& in) {
  LineReader r(in);
  std::vector<std::string_view> tok;
  if (!r.next(tok) || tok[0] != "tfmesh" || tok.size() != 2) {
    throw MeshFormatError(Kind::bad_header, r.line(), "expected header 'tfmesh 1'");
  }
  int version = 0;
  if (!parse(tok[1], version)) throw MeshFormatError(Kind::bad_header, r.line(), "bad version field");
  if (version != 1) {
    throw MeshFormatError(Kind::unsupported_version, r.line(), "unsupported version " + std::to_string(version));
  }

  const std::int64_t nv64 = section(r, tok, "vertices");
  if (nv64 > std::numeric_limits<Index>::max()) throw MeshFormatError(Kind::malformed, r.line(), "too many vertices");
  const Index nv = static_cast<Index>(nv64);
  std::vector<Vec3> vertices(static_cast<std::size_t>(nv));
  for (Index v = 0; v < nv; ++v) {
    record(r, tok, 3, "vertex list");
    for (int k = 0; k < 3; ++k)
      if (!parse(tok[k], vertices[v][k]) || !std::isfinite(vertices[v][k])) {
        throw MeshFormatError(Kind::malformed, r.line(), "bad coordinate");
      }
  }

  const std::int64_t nc = section(r, tok, "cells");
  std::vector<Cell> cells(static_cast<std::size_t>(nc));
  std::vector<int> regions(static_cast<std::size_t>(nc));
  for (std::int64_t c = 0; c < nc; ++c) {
    record(r, tok, 5, "cell list");
    for (int k = 0; k < 4; ++k) cells[c][k] = vertex_index(r, tok[k], nv, "cell");
    if (!parse(tok[4], regions[c])) throw MeshFormatError(Kind::malformed, r.line(), "bad cell region");
  }

  const std::int64_t nf = section(r, tok, "facets");
  FacetTagMap tags;
  tags.reserve(static_cast<std::size_t>(nf));
  for (std::int64_t f = 0; f < nf; ++f) {
    record(r, tok, 4, "facet list");
    const Index a = vertex_index(r, tok[0], nv, "facet");
    const Index b = vertex_index(r, tok[1], nv, "facet");
    const Index c = vertex_index(r, tok[2], nv, "facet");
    int tag = 0;
    if (!parse(tok[3], tag)) throw MeshFormatError(Kind::malformed, r.line(), "bad facet tag");
    if (!tags.emplace(make_facet_key(a, b, c), tag).second) {
      throw MeshFormatError(Kind::malformed, r.line(), "duplicate facet");
    }
  }
  if (r.next(tok)) throw MeshFormatError(Kind::malformed, r.line(), "unexpected content after the facet list");
  return Mesh(std::move(vertices), std::move(cells), std::move(regions), std::move(tags));
}

Mesh read_mesh(const std::string& path) {
  auto f = open_in(path);
  return read_mesh(f);
}

void write_vtk(const Mesh& mesh, const std::vector<PointField>& fields, std::ostream& out) {
  const Index nv = mesh.num_vertices();
  for (const PointField& f : fields) {
    if (f.components != 1 && f.components != 3) throw ValidationError("vtk: field '" + f.name + "' must have 1 or 3 components");
    if (f.num_nodes < nv || f.values.size() != static_cast<std::size_t>(f.num_nodes) * f.components) {
      throw ValidationError("vtk: field '" + f.name + "' does not match the mesh");
    }
  }
  out << "# vtk DataFile Version 3.0\n";
  out << "tfem fields\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nv << " double\n";
  for (const Vec3& x : mesh.vertices())
    out << format_double(x[0]) << ' ' << format_double(x[1]) << ' ' << format_double(x[2]) << '\n';
  out << "CELLS " << mesh.num_cells() << ' ' << 5 * static_cast<std::int64_t>(mesh.num_cells()) << '\n';
  for (const Cell& k : mesh.cells()) out << "4 " << k[0] << ' ' << k[1] << ' ' << k[2] << ' ' << k[3] << '\n';
  out << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (Index c = 0; c < mesh.num_cells(); ++c) out << "10\n";
  out << "CELL_DATA " << mesh.num_cells() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (int r : mesh.cell_region()) out << r << '\n';
  if (!fields.empty()) out << "POINT_DATA " << nv << '\n';
  for (const PointField& f : fields) {
    if (f.components == 1) {
      out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (Index v = 0; v < nv; ++v) out << format_double(f.values[v]) << '\n';
    } else {
      out << "VECTORS " << f.name << " double\n";
      for (Index v = 0; v < nv; ++v) {
        out << format_double(f.values[3 * v]) << ' ' << format_double(f.values[3 * v + 1]) << ' '
            << format_double(f.values[3 * v + 2]) << '\n';
      }
    }
  }
  if (!out) throw ValidationError("vtk: stream error");
}

void write_vtk(const Mesh& mesh, const std::vector<PointField>& fields, const std::string& path) {
  auto f = open_out(path);
  write_vtk(mesh, fields, f);
}

VtkData read_vtk(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# vtk DataFile Version", 0) != 0) {
    throw ValidationError("vtk: missing version line");
  }
  std::getline(in, line);  // title
  std::string word;
  in >> word;
  if (word != "ASCII") throw ValidationError("vtk: only ASCII files are supported");
  in >> word >> line;
  if (word != "DATASET" || line != "UNSTRUCTURED_GRID") throw ValidationError("vtk: expected an unstructured grid");

  VtkData d;
  enum class Where { none, point, cell } where = Where::none;
  auto need = [&](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("vtk: ") + what);
  };
  while (in >> word) {
    if (word == "POINTS") {
      std::size_t n = 0;
      in >> n >> word;
      d.points.resize(n);
      for (auto& x : d.points) in >> x[0] >> x[1] >> x[2];
      need(static_cast<bool>(in), "truncated POINTS");
    } else if (word == "CELLS") {
      std::size_t n = 0, total = 0;
      in >> n >> total;
      d.cells.resize(n);
      for (auto& c : d.cells) {
        std::size_t k = 0;
        in >> k;
        c.resize(k);
        for (auto& v : c) in >> v;
      }
      need(static_cast<bool>(in), "truncated CELLS");
    } else if (word == "CELL_TYPES") {
      std::size_t n = 0;
      in >> n;
      d.cell_types.resize(n);
      for (auto& t : d.cell_types) in >> t;
      need(static_cast<bool>(in), "truncated CELL_TYPES");
    } else if (word == "POINT_DATA" || word == "CELL_DATA") {
      std::size_t n = 0;
      in >> n;
      where = word == "POINT_DATA" ? Where::point : Where::cell;
    } else if (word == "SCALARS") {
      std::string name, type;
      int comps = 1;
      in >> name >> type;
      std::getline(in, line);
      if (!line.empty()) std::istringstream(line) >> comps;
      in >> word >> line;
      need(word == "LOOKUP_TABLE" && comps == 1, "unsupported SCALARS block");
      const std::size_t n = where == Where::point ? d.points.size() : d.cells.size();
      std::vector<double> v(n);
      for (auto& x : v) in >> x;
      need(static_cast<bool>(in) && where != Where::none, "truncated SCALARS");
      (where == Where::point ? d.point_scalars : d.cell_scalars)[name] = std::move(v);
    } else if (word == "VECTORS") {
      std::string name, type;
      in >> name >> type;
      need(where == Where::point, "VECTORS outside POINT_DATA");
      std::vector<Vec3> v(d.points.size());
      for (auto& x : v) in >> x[0] >> x[1] >> x[2];
      need(static_cast<bool>(in), "truncated VECTORS");
      d.point_vectors[name] = std::move(v);
    } else {
      throw ValidationError("vtk: unexpected keyword '" + word + "'");
    }
  }
  return d;
}

VtkData read_vtk(const std::string& path) {
  auto f = open_in(path);
  return read_vtk(f);
}

}  // namespace tfem
