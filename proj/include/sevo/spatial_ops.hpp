#pragma once

#include <Eigen/SparseCore>

#include <array>
#include <cstddef>
#include <iosfwd>

namespace sevo {

/// Sparse operator assembled from (row, col, value) triplets; duplicates are summed.
using SparseOperator = Eigen::SparseMatrix<double>;

/// Writes one "row col value" line per stored entry (17 significant digits).
void write_triplets(std::ostream& os, const SparseOperator& op);

/// max |A + A^T| over all entries.
double max_skew_defect(const SparseOperator& a);

struct GradDiv {
    SparseOperator grad;  ///< cells -> faces, Dirichlet (interior) gradient
    SparseOperator div;   ///< faces -> cells, div = -grad^T entrywise
};

/// Uniform 1D grid with n_cells unknowns at x_i = (i+1) h and zero Dirichlet
/// values at x = 0 and x = (n_cells+1) h. grad maps onto the n_cells+1 faces
/// by (u_i - u_{i-1}) / h. Throws InvalidGrid for n_cells == 0 or h <= 0.
GradDiv build_grad_div_1d(std::size_t n_cells, double h);

/// Tensor-product version on an nx x ny grid; faces are ordered as all
/// x-faces ((nx+1)*ny, x fastest) followed by all y-faces (nx*(ny+1)).
/// Cell (i, j) has index i + nx*j. Requires nx, ny >= 2.
GradDiv build_grad_div_2d(std::size_t nx, std::size_t ny, double h);

/// Index bookkeeping of a Yee grid on the box [0, nx h] x [0, ny h] x [0, nz h].
///
/// Electric unknowns live on interior edges (tangential components vanish on
/// the boundary); magnetic unknowns live on all faces. Nodes carrying the
/// potential of grad° are the interior nodes.
class YeeLayout {
public:
    YeeLayout(std::size_t nx, std::size_t ny, std::size_t nz, double h);

    std::size_t nx() const { return n_[0]; }
    std::size_t ny() const { return n_[1]; }
    std::size_t nz() const { return n_[2]; }
    double h() const { return h_; }

    std::size_t n_edges() const { return edge_offset_[3]; }
    std::size_t n_faces() const { return face_offset_[3]; }
    std::size_t n_nodes() const;

    /// Edge along `axis` starting at node (i, j, k); -1 if it is a boundary
    /// (tangential) edge that carries no unknown.
    long edge(int axis, long i, long j, long k) const;
    /// Face normal to `axis` with lower corner at node (i, j, k).
    long face(int axis, long i, long j, long k) const;
    /// Interior node index, -1 on the boundary.
    long node(long i, long j, long k) const;

    /// Midpoint of edge `e` in physical coordinates, and its axis.
    std::array<double, 3> edge_midpoint(std::size_t e, int* axis = nullptr) const;

private:
    std::array<std::size_t, 3> n_;
    double h_;
    std::array<std::size_t, 4> edge_offset_{};
    std::array<std::size_t, 4> face_offset_{};
};

struct CurlPair {
    SparseOperator curl;       ///< faces -> edges, curl = curl_ring^T
    SparseOperator curl_ring;  ///< interior edges -> faces (tangential E = 0)
};

/// Yee-staggered curl pair; each of nx, ny, nz >= 2.
CurlPair build_curl_pair_3d(std::size_t nx, std::size_t ny, std::size_t nz, double h);

/// grad° from interior nodes to interior edges on the same layout; curl_ring * grad° = 0.
SparseOperator build_node_grad_3d(std::size_t nx, std::size_t ny, std::size_t nz, double h);

/// Block operator A = [[0, s C^T], [-s C, 0]] on H1 (+ gap) + H2, with C : H1 -> H2.
///
/// An optional zero "gap" block of dimension gap_dim sits between H1 and H2,
/// which is how the viscoplastic system keeps its internal variables out of A.
struct SkewBlockOperator {
    SparseOperator c;
    int sign = 1;
    std::size_t gap_dim = 0;
    SparseOperator a;

    std::size_t dim_h1() const { return static_cast<std::size_t>(c.cols()); }
    std::size_t dim_h2() const { return static_cast<std::size_t>(c.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(a.rows()); }
};

SkewBlockOperator assemble_block(const SparseOperator& c, int sign, std::size_t gap_dim = 0);

}  // namespace sevo
