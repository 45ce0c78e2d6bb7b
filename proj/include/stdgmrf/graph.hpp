#pragma once

#include <optional>
#include <vector>

#include "stdgmrf/types.hpp"

namespace stdgmrf {

// One input edge record: src -> dst with weight w and optional unit normal
// (nx, ny) pointing from src to dst (embedded graphs only).
struct EdgeRecord {
  int src = 0;
  int dst = 0;
  double weight = 1.0;
  bool has_normal = false;
  double nx = 0.0;
  double ny = 0.0;
};

// Sparse base graph. Immutable after construction; safe to share read-only
// across threads.
struct GraphSpec {
  int n_nodes = 0;
  SpMat adjacency;        // CSR, A_ij = w_ij for edge (i, j)
  SpMat adjacency_t;      // A^T (aliases the same values for undirected graphs)
  Vec degrees;            // out-degrees: d_i = sum_j w_ij
  Vec degrees_in;         // in-degrees; equals `degrees` when undirected
  bool directed = false;
  // Per-nonzero normals aligned with the CSR value order of `adjacency`.
  std::optional<Eigen::Matrix<double, Eigen::Dynamic, 2>> edge_normals;
  std::optional<Vec> spectrum;  // eigenvalues of D^{-1} A, ascending
  std::optional<int> lattice_side;

  bool has_normals() const { return edge_normals.has_value(); }
  bool has_spectrum() const { return spectrum.has_value(); }
};

// side x side periodic lattice with 4-nearest-neighbor connectivity,
// row-major node indexing (node = row*side + col), unit weights, and grid
// normals n_ij = (dcol, drow).
GraphSpec build_periodic_lattice(int side);

// Builds a GraphSpec from edge records. Undirected inputs list each edge
// once; the loader adds the symmetric closure (normals negated). Node count
// is inferred as max index + 1. Self-loops are allowed (they carry their
// weight into the degree), isolated nodes are not.
GraphSpec load_graph(const std::vector<EdgeRecord>& edges, bool directed = false);

// Eigenvalues of D^{-1} A via the similar symmetric matrix
// D^{-1/2} A D^{-1/2}, cyclic Jacobi, sorted ascending. Undirected graphs
// only; dense desk-scale solve (N <= 4096).
GraphSpec precompute_spectrum(GraphSpec g);

// Closed-form spectrum of D^{-1}A for the periodic 4-neighbor lattice:
// (cos(2 pi p / side) + cos(2 pi q / side)) / 2, sorted ascending.
Vec torus_spectrum(int side);

// Fills g.spectrum if absent, using the closed form for lattices and the
// Jacobi eigensolve otherwise.
void ensure_spectrum(GraphSpec& g);

// Jacobi eigenvalues of a dense symmetric matrix, ascending. Exposed for
// reuse by tests and oracles.
Vec symmetric_eigenvalues(Mat a);

}  // namespace stdgmrf
