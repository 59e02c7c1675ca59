#include "cmalab/grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cmalab {

NodeId Grid::snap(const RPoint& p, double* snap_dist) const {
  IdxVec ix{};
  for (int a = 0; a < dim(); ++a) {
    int i = static_cast<int>(std::lround((p[a] - origin[a]) / spacing));
    if (i < 0) i = 0;
    if (i >= dims[a]) i = dims[a] - 1;
    ix[a] = i;
  }
  NodeId id = index(ix);
  if (snap_dist) {
    RPoint q = point(id);
    double s = 0.0;
    for (int a = 0; a < dim(); ++a) s += (p[a] - q[a]) * (p[a] - q[a]);
    *snap_dist = std::sqrt(s);
  }
  return id;
}

GridPtr build_grid(int n, int resolution, double halfwidth) {
  if (n != 1 && n != 2) throw std::invalid_argument("build_grid: n must be 1 or 2");
  if (resolution < 5) throw std::invalid_argument("build_grid: resolution must be >= 5");
  if (resolution % 2 == 0) throw std::invalid_argument("build_grid: resolution must be odd");
  if (!(halfwidth > 0.0)) throw std::invalid_argument("build_grid: halfwidth must be > 0");
  auto g = std::make_shared<Grid>();
  g->n = n;
  for (int a = 0; a < 2 * n; ++a) {
    g->dims[a] = resolution;
    g->origin[a] = -halfwidth;
  }
  g->spacing = 2.0 * halfwidth / (resolution - 1);
  return g;
}

ScalarField sample_field(GridPtr grid, const std::function<double(const RPoint&)>& f) {
  ScalarField out(grid);
  const NodeId total = grid->count();
  for (NodeId id = 0; id < total; ++id) out.set(id, f(grid->point(id)));
  return out;
}

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("CMAF: truncated file");
  return v;
}

void write_header(std::ostream& os, const Grid& g) {
  os.write("CMAF", 4);
  put<std::uint32_t>(os, 1u);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(g.n));
  for (int a = 0; a < g.dim(); ++a) put<std::uint32_t>(os, static_cast<std::uint32_t>(g.dims[a]));
  for (int a = 0; a < g.dim(); ++a) put<double>(os, g.origin[a]);
  put<double>(os, g.spacing);
}

GridPtr read_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "CMAF", 4) != 0) throw std::runtime_error("CMAF: bad magic");
  auto version = get<std::uint32_t>(is);
  if (version != 1u) throw std::runtime_error("CMAF: unsupported version");
  auto g = std::make_shared<Grid>();
  g->n = static_cast<int>(get<std::uint8_t>(is));
  if (g->n != 1 && g->n != 2) throw std::runtime_error("CMAF: bad complex dimension");
  for (int a = 0; a < g->dim(); ++a) g->dims[a] = static_cast<int>(get<std::uint32_t>(is));
  for (int a = 0; a < g->dim(); ++a) g->origin[a] = get<double>(is);
  g->spacing = get<double>(is);
  return g;
}

}  // namespace

void write_cmaf_field(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("CMAF: cannot open " + path);
  write_header(os, *f.grid);
  os.write(reinterpret_cast<const char*>(f.values.data()),
           static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

ScalarField read_cmaf_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("CMAF: cannot open " + path);
  GridPtr g = read_header(is);
  ScalarField f(g);
  is.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("CMAF: truncated payload");
  std::fill(f.defined.begin(), f.defined.end(), std::uint8_t{1});
  return f;
}

}  // namespace cmalab
