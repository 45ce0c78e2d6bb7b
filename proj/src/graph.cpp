#include "stdgmrf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>

#include "stdgmrf/errors.hpp"

namespace stdgmrf {

namespace {

struct EdgeEntry {
  int src, dst;
  double w, nx, ny;
};

// Builds CSR adjacency plus aligned normals from a sorted, deduplicated edge
// list. Triplet insertion order must match the final CSR nonzero order, so
// entries are sorted by (src, dst) first.
GraphSpec assemble(int n, std::vector<EdgeEntry> entries, bool directed, bool with_normals) {
  std::sort(entries.begin(), entries.end(), [](const EdgeEntry& a, const EdgeEntry& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
  for (size_t e = 1; e < entries.size(); ++e) {
    if (entries[e].src == entries[e - 1].src && entries[e].dst == entries[e - 1].dst)
      throw InvalidEdge("duplicate edge (" + std::to_string(entries[e].src) + ", " +
                        std::to_string(entries[e].dst) + ")");
  }

  GraphSpec g;
  g.n_nodes = n;
  g.directed = directed;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(entries.size());
  for (const auto& e : entries) trips.emplace_back(e.src, e.dst, e.w);
  g.adjacency = SpMat(n, n);
  g.adjacency.setFromTriplets(trips.begin(), trips.end());
  g.adjacency.makeCompressed();
  g.adjacency_t = SpMat(g.adjacency.transpose());
  g.adjacency_t.makeCompressed();

  g.degrees = g.adjacency * Vec::Ones(n);
  g.degrees_in = g.adjacency_t * Vec::Ones(n);
  for (int i = 0; i < n; ++i) {
    if (g.degrees[i] <= 0.0 && g.degrees_in[i] <= 0.0)
      throw InvalidEdge("isolated node " + std::to_string(i));
    if (!directed && g.degrees[i] <= 0.0)
      throw InvalidEdge("isolated node " + std::to_string(i));
  }

  if (with_normals) {
    Eigen::Matrix<double, Eigen::Dynamic, 2> normals(entries.size(), 2);
    for (size_t e = 0; e < entries.size(); ++e) {
      normals(e, 0) = entries[e].nx;
      normals(e, 1) = entries[e].ny;
    }
    g.edge_normals = std::move(normals);
  }
  return g;
}

}  // namespace

GraphSpec build_periodic_lattice(int side) {
  if (side < 3) throw InvalidLattice("side must be >= 3, got " + std::to_string(side));
  const int n = side * side;
  std::vector<EdgeEntry> entries;
  entries.reserve(static_cast<size_t>(4) * n);
  const int offsets[4][2] = {{0, 1}, {0, -1}, {1, 0}, {-1, 0}};  // (drow, dcol)
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int i = r * side + c;
      for (const auto& off : offsets) {
        const int rr = (r + off[0] + side) % side;
        const int cc = (c + off[1] + side) % side;
        const int j = rr * side + cc;
        // normal points from i to j in grid coordinates (x = col, y = row)
        entries.push_back({i, j, 1.0, static_cast<double>(off[1]), static_cast<double>(off[0])});
      }
    }
  }
  GraphSpec g = assemble(n, std::move(entries), /*directed=*/false, /*with_normals=*/true);
  g.lattice_side = side;
  return g;
}

GraphSpec load_graph(const std::vector<EdgeRecord>& edges, bool directed) {
  if (edges.empty()) throw InvalidEdge("empty edge list");
  const bool with_normals = edges.front().has_normal;
  int n = 0;
  for (const auto& e : edges) {
    if (e.src < 0 || e.dst < 0) throw InvalidEdge("negative node index");
    if (e.weight <= 0.0) throw InvalidEdge("nonpositive weight on edge (" +
                                           std::to_string(e.src) + ", " + std::to_string(e.dst) + ")");
    if (e.has_normal != with_normals)
      throw InvalidEdge("normals must be present on all edges or none");
    n = std::max({n, e.src + 1, e.dst + 1});
  }
  std::vector<EdgeEntry> entries;
  entries.reserve(edges.size() * (directed ? 1 : 2));
  for (const auto& e : edges) {
    entries.push_back({e.src, e.dst, e.weight, e.nx, e.ny});
    if (!directed && e.src != e.dst)
      entries.push_back({e.dst, e.src, e.weight, -e.nx, -e.ny});
  }
  return assemble(n, std::move(entries), directed, with_normals);
}

Vec symmetric_eigenvalues(Mat a) {
  const Eigen::Index n = a.rows();
  if (n != a.cols()) throw InvalidInput("matrix must be square");
  // cyclic-by-row Jacobi; eigenvalues only, no accumulation of rotations
  const double scale = std::max(1.0, a.norm());
  const double tol = 1e-12 * scale;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    off = std::sqrt(off);
    if (off <= tol) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol / (static_cast<double>(n) * static_cast<double>(n))) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
      }
    }
  }
  Vec ev = a.diagonal();
  std::sort(ev.data(), ev.data() + n);
  return ev;
}

GraphSpec precompute_spectrum(GraphSpec g) {
  if (g.directed) throw UnsupportedGraph("spectrum requires an undirected graph");
  if (g.n_nodes > 4096) throw TooLarge("dense eigensolve limited to N <= 4096");
  Vec dinv_sqrt = g.degrees.array().rsqrt();
  Mat b = Mat(g.adjacency);
  b = dinv_sqrt.asDiagonal() * b * dinv_sqrt.asDiagonal();
  b = 0.5 * (b + b.transpose());  // keep exactly symmetric
  g.spectrum = symmetric_eigenvalues(std::move(b));
  return g;
}

Vec torus_spectrum(int side) {
  if (side < 3) throw InvalidLattice("side must be >= 3");
  Vec ev(static_cast<Eigen::Index>(side) * side);
  Eigen::Index idx = 0;
  for (int p = 0; p < side; ++p)
    for (int q = 0; q < side; ++q)
      ev[idx++] = 0.5 * (std::cos(2.0 * M_PI * p / side) + std::cos(2.0 * M_PI * q / side));
  std::sort(ev.data(), ev.data() + ev.size());
  return ev;
}

void ensure_spectrum(GraphSpec& g) {
  if (g.has_spectrum()) return;
  if (g.lattice_side) {
    g.spectrum = torus_spectrum(*g.lattice_side);
  } else {
    g = precompute_spectrum(std::move(g));
  }
}

}  // namespace stdgmrf
