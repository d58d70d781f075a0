#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <unordered_map>

#include "shapead/error.hpp"
#include "shapead/mesh.hpp"

namespace shapead {

namespace {

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  std::string require(const char* what) {
    std::string line;
    if (!next(line)) fail(std::string("unexpected end of file while reading ") + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(source_ + ":" + std::to_string(line_no_) + ": " + msg);
  }

 private:
  std::istream& in_;
  std::string source_;
  int line_no_ = 0;
};

void expect_end(LineReader& r, const std::string& tag) {
  if (r.require(tag.c_str()) != tag) r.fail("expected " + tag);
}

}  // namespace

std::shared_ptr<Mesh> load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file " + path.string());
  LineReader r(in, path.string());

  std::vector<Point> vertices;
  std::unordered_map<long, int> node_index;
  std::vector<CellVertices> cells;
  std::vector<std::pair<EdgeKey, int>> lines;
  bool have_format = false, have_nodes = false, have_elements = false;

  std::string line;
  while (r.next(line)) {
    if (line == "$MeshFormat") {
      std::istringstream ss(r.require("$MeshFormat"));
      double version = 0.0;
      int file_type = -1, data_size = 0;
      if (!(ss >> version >> file_type >> data_size)) r.fail("malformed $MeshFormat header");
      if (version < 2.0 || version >= 3.0) r.fail("unsupported Gmsh version " + std::to_string(version));
      if (file_type != 0) r.fail("only ASCII Gmsh files are supported");
      expect_end(r, "$EndMeshFormat");
      have_format = true;
    } else if (line == "$Nodes") {
      long n = -1;
      std::istringstream(r.require("$Nodes")) >> n;
      if (n < 0) r.fail("malformed node count");
      vertices.reserve(n);
      for (long k = 0; k < n; ++k) {
        std::istringstream ss(r.require("$Nodes"));
        long id;
        double x, y, z;
        if (!(ss >> id >> x >> y >> z)) r.fail("malformed node line");
        if (!node_index.emplace(id, static_cast<int>(vertices.size())).second) {
          r.fail("duplicate node id " + std::to_string(id));
        }
        vertices.push_back({x, y});
      }
      expect_end(r, "$EndNodes");
      have_nodes = true;
    } else if (line == "$Elements") {
      if (!have_nodes) r.fail("$Elements before $Nodes");
      long n = -1;
      std::istringstream(r.require("$Elements")) >> n;
      if (n < 0) r.fail("malformed element count");
      auto node = [&](long id) {
        auto it = node_index.find(id);
        if (it == node_index.end()) r.fail("element references unknown node " + std::to_string(id));
        return it->second;
      };
      for (long k = 0; k < n; ++k) {
        std::istringstream ss(r.require("$Elements"));
        long id;
        int type, ntags;
        if (!(ss >> id >> type >> ntags) || ntags < 0) r.fail("malformed element line");
        std::vector<long> tags(ntags);
        for (auto& t : tags)
          if (!(ss >> t)) r.fail("malformed element tags");
        if (type == 1) {
          long a, b;
          if (!(ss >> a >> b)) r.fail("malformed line element");
          if (tags.empty()) r.fail("line element " + std::to_string(id) + " has no physical tag");
          lines.push_back({make_edge(node(a), node(b)), static_cast<int>(tags[0])});
        } else if (type == 2) {
          long a, b, c;
          if (!(ss >> a >> b >> c)) r.fail("malformed triangle element");
          cells.push_back({node(a), node(b), node(c)});
        }
      }
      expect_end(r, "$EndElements");
      have_elements = true;
    } else if (line.size() > 1 && line[0] == '$' && line.rfind("$End", 0) != 0) {
      // Skip unknown sections such as $PhysicalNames.
      const std::string end = "$End" + line.substr(1);
      std::string inner;
      bool closed = false;
      while (r.next(inner)) {
        if (inner == end) {
          closed = true;
          break;
        }
      }
      if (!closed) r.fail("unterminated section " + line);
    } else {
      r.fail("unexpected line '" + line + "'");
    }
  }
  if (!have_format) r.fail("missing $MeshFormat section");
  if (!have_elements) r.fail("missing $Elements section");

  std::map<EdgeKey, int> markers;
  for (const auto& [edge, tag] : lines) markers[edge] = tag;
  return std::make_shared<Mesh>(std::move(vertices), std::move(cells), std::move(markers));
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file " + path.string());
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n" << mesh.num_vertices() << '\n';
  out << std::setprecision(17);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    out << v + 1 << ' ' << mesh.vertices()[v][0] << ' ' << mesh.vertices()[v][1] << " 0\n";
  }
  out << "$EndNodes\n$Elements\n" << mesh.facet_markers().size() + mesh.cells().size() << '\n';
  long id = 1;
  for (const auto& [edge, tag] : mesh.facet_markers()) {
    out << id++ << " 1 2 " << tag << ' ' << tag << ' ' << edge.first + 1 << ' ' << edge.second + 1 << '\n';
  }
  for (const auto& c : mesh.cells()) {
    out << id++ << " 2 2 0 0 " << c[0] + 1 << ' ' << c[1] + 1 << ' ' << c[2] + 1 << '\n';
  }
  out << "$EndElements\n";
  if (!out) throw MeshError("failed writing mesh file " + path.string());
}

}  // namespace shapead
