#include "sevo/spatial_ops.hpp"

#include "sevo/errors.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace sevo {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseOperator from_triplets(std::size_t rows, std::size_t cols,
                             const std::vector<Triplet>& triplets)
{
    SparseOperator op(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    op.setFromTriplets(triplets.begin(), triplets.end());
    op.makeCompressed();
    return op;
}

void check_spacing(double h)
{
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw InvalidGrid("mesh width must be positive, got " + std::to_string(h));
    }
}

}  // namespace

void write_triplets(std::ostream& os, const SparseOperator& op)
{
    char buffer[96];
    for (Eigen::Index col = 0; col < op.outerSize(); ++col) {
        for (SparseOperator::InnerIterator it(op, col); it; ++it) {
            std::snprintf(buffer, sizeof buffer, "%ld %ld %.17g\n", static_cast<long>(it.row()),
                          static_cast<long>(it.col()), it.value());
            os << buffer;
        }
    }
}

double max_skew_defect(const SparseOperator& a)
{
    const SparseOperator sum = a + SparseOperator(a.transpose());
    double worst = 0.0;
    for (Eigen::Index col = 0; col < sum.outerSize(); ++col) {
        for (SparseOperator::InnerIterator it(sum, col); it; ++it) {
            worst = std::max(worst, std::abs(it.value()));
        }
    }
    return worst;
}

GradDiv build_grad_div_1d(std::size_t n_cells, double h)
{
    if (n_cells == 0) {
        throw InvalidGrid("1D grid needs at least one cell");
    }
    check_spacing(h);
    std::vector<Triplet> triplets;
    triplets.reserve(2 * n_cells);
    // Face f sits between unknowns f-1 and f; the outer faces see a zero neighbour.
    for (std::size_t f = 0; f <= n_cells; ++f) {
        if (f < n_cells) {
            triplets.emplace_back(static_cast<int>(f), static_cast<int>(f), 1.0 / h);
        }
        if (f > 0) {
            triplets.emplace_back(static_cast<int>(f), static_cast<int>(f - 1), -1.0 / h);
        }
    }
    GradDiv out;
    out.grad = from_triplets(n_cells + 1, n_cells, triplets);
    out.div = -SparseOperator(out.grad.transpose());
    return out;
}

GradDiv build_grad_div_2d(std::size_t nx, std::size_t ny, double h)
{
    if (nx < 2 || ny < 2) {
        throw InvalidGrid("2D grid needs at least 2 cells per direction");
    }
    check_spacing(h);
    const std::size_t n_xfaces = (nx + 1) * ny;
    const std::size_t n_yfaces = nx * (ny + 1);
    std::vector<Triplet> triplets;
    triplets.reserve(4 * nx * ny);
    auto cell = [nx](std::size_t i, std::size_t j) { return static_cast<int>(i + nx * j); };
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t f = 0; f <= nx; ++f) {
            const int row = static_cast<int>(f + (nx + 1) * j);
            if (f < nx) {
                triplets.emplace_back(row, cell(f, j), 1.0 / h);
            }
            if (f > 0) {
                triplets.emplace_back(row, cell(f - 1, j), -1.0 / h);
            }
        }
    }
    for (std::size_t f = 0; f <= ny; ++f) {
        for (std::size_t i = 0; i < nx; ++i) {
            const int row = static_cast<int>(n_xfaces + i + nx * f);
            if (f < ny) {
                triplets.emplace_back(row, cell(i, f), 1.0 / h);
            }
            if (f > 0) {
                triplets.emplace_back(row, cell(i, f - 1), -1.0 / h);
            }
        }
    }
    GradDiv out;
    out.grad = from_triplets(n_xfaces + n_yfaces, nx * ny, triplets);
    out.div = -SparseOperator(out.grad.transpose());
    return out;
}

YeeLayout::YeeLayout(std::size_t nx, std::size_t ny, std::size_t nz, double h)
    : n_{nx, ny, nz}, h_(h)
{
    if (nx < 2 || ny < 2 || nz < 2) {
        throw InvalidGrid("Yee grid needs at least 2 cells per direction");
    }
    check_spacing(h);
    for (int axis = 0; axis < 3; ++axis) {
        std::size_t edges = 1;
        std::size_t faces = 1;
        for (int d = 0; d < 3; ++d) {
            edges *= d == axis ? n_[d] : n_[d] - 1;
            faces *= d == axis ? n_[d] + 1 : n_[d];
        }
        edge_offset_[axis + 1] = edge_offset_[axis] + edges;
        face_offset_[axis + 1] = face_offset_[axis] + faces;
    }
}

std::size_t YeeLayout::n_nodes() const
{
    return (n_[0] - 1) * (n_[1] - 1) * (n_[2] - 1);
}

long YeeLayout::edge(int axis, long i, long j, long k) const
{
    const long c[3] = {i, j, k};
    long extent[3];
    long offset[3];
    for (int d = 0; d < 3; ++d) {
        const long n = static_cast<long>(n_[d]);
        if (d == axis) {
            if (c[d] < 0 || c[d] >= n) {
                return -1;
            }
            extent[d] = n;
            offset[d] = c[d];
        } else {
            if (c[d] < 1 || c[d] > n - 1) {
                return -1;
            }
            extent[d] = n - 1;
            offset[d] = c[d] - 1;
        }
    }
    return static_cast<long>(edge_offset_[axis]) + offset[0] +
           extent[0] * (offset[1] + extent[1] * offset[2]);
}

long YeeLayout::face(int axis, long i, long j, long k) const
{
    const long c[3] = {i, j, k};
    long extent[3];
    for (int d = 0; d < 3; ++d) {
        const long n = static_cast<long>(n_[d]);
        extent[d] = d == axis ? n + 1 : n;
        if (c[d] < 0 || c[d] >= extent[d]) {
            return -1;
        }
    }
    return static_cast<long>(face_offset_[axis]) + c[0] + extent[0] * (c[1] + extent[1] * c[2]);
}

long YeeLayout::node(long i, long j, long k) const
{
    const long c[3] = {i, j, k};
    for (int d = 0; d < 3; ++d) {
        if (c[d] < 1 || c[d] > static_cast<long>(n_[d]) - 1) {
            return -1;
        }
    }
    const long ex = static_cast<long>(n_[0]) - 1;
    const long ey = static_cast<long>(n_[1]) - 1;
    return (i - 1) + ex * ((j - 1) + ey * (k - 1));
}

std::array<double, 3> YeeLayout::edge_midpoint(std::size_t e, int* axis_out) const
{
    int axis = 0;
    while (axis < 2 && e >= edge_offset_[axis + 1]) {
        ++axis;
    }
    std::size_t local = e - edge_offset_[axis];
    std::array<double, 3> x{};
    for (int d = 0; d < 3; ++d) {
        const std::size_t extent = d == axis ? n_[d] : n_[d] - 1;
        const std::size_t o = local % extent;
        local /= extent;
        x[d] = d == axis ? (static_cast<double>(o) + 0.5) * h_ : static_cast<double>(o + 1) * h_;
    }
    if (axis_out != nullptr) {
        *axis_out = axis;
    }
    return x;
}

CurlPair build_curl_pair_3d(std::size_t nx, std::size_t ny, std::size_t nz, double h)
{
    const YeeLayout layout(nx, ny, nz, h);
    std::vector<Triplet> triplets;
    triplets.reserve(4 * layout.n_faces());
    const double inv_h = 1.0 / h;
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3;
        const int c = (a + 2) % 3;
        const long n[3] = {static_cast<long>(nx), static_cast<long>(ny), static_cast<long>(nz)};
        long extent[3];
        for (int d = 0; d < 3; ++d) {
            extent[d] = d == a ? n[d] + 1 : n[d];
        }
        for (long k = 0; k < extent[2]; ++k) {
            for (long j = 0; j < extent[1]; ++j) {
                for (long i = 0; i < extent[0]; ++i) {
                    const long row = layout.face(a, i, j, k);
                    long p[3] = {i, j, k};
                    // (curl E)_a = d_b E_c - d_c E_b around the face.
                    auto add = [&](int axis, int shift_axis, double sign) {
                        long q[3] = {p[0], p[1], p[2]};
                        if (shift_axis >= 0) {
                            ++q[shift_axis];
                        }
                        const long col = layout.edge(axis, q[0], q[1], q[2]);
                        if (col >= 0) {
                            triplets.emplace_back(static_cast<int>(row), static_cast<int>(col),
                                                  sign * inv_h);
                        }
                    };
                    add(c, b, 1.0);
                    add(c, -1, -1.0);
                    add(b, c, -1.0);
                    add(b, -1, 1.0);
                }
            }
        }
    }
    CurlPair out;
    out.curl_ring = from_triplets(layout.n_faces(), layout.n_edges(), triplets);
    out.curl = SparseOperator(out.curl_ring.transpose());
    return out;
}

SparseOperator build_node_grad_3d(std::size_t nx, std::size_t ny, std::size_t nz, double h)
{
    const YeeLayout layout(nx, ny, nz, h);
    std::vector<Triplet> triplets;
    const double inv_h = 1.0 / h;
    const long n[3] = {static_cast<long>(nx), static_cast<long>(ny), static_cast<long>(nz)};
    for (int a = 0; a < 3; ++a) {
        for (long k = 0; k <= n[2]; ++k) {
            for (long j = 0; j <= n[1]; ++j) {
                for (long i = 0; i <= n[0]; ++i) {
                    const long row = layout.edge(a, i, j, k);
                    if (row < 0) {
                        continue;
                    }
                    long q[3] = {i, j, k};
                    const long from = layout.node(q[0], q[1], q[2]);
                    ++q[a];
                    const long to = layout.node(q[0], q[1], q[2]);
                    if (to >= 0) {
                        triplets.emplace_back(static_cast<int>(row), static_cast<int>(to), inv_h);
                    }
                    if (from >= 0) {
                        triplets.emplace_back(static_cast<int>(row), static_cast<int>(from),
                                              -inv_h);
                    }
                }
            }
        }
    }
    return from_triplets(layout.n_edges(), layout.n_nodes(), triplets);
}

SkewBlockOperator assemble_block(const SparseOperator& c, int sign, std::size_t gap_dim)
{
    if (sign != 1 && sign != -1) {
        throw PreconditionViolation("sign convention must be +1 or -1");
    }
    SkewBlockOperator out;
    out.c = c;
    out.sign = sign;
    out.gap_dim = gap_dim;
    const auto n1 = static_cast<int>(c.cols());
    const int second = n1 + static_cast<int>(gap_dim);
    const std::size_t dim = static_cast<std::size_t>(c.cols() + c.rows()) + gap_dim;
    std::vector<Triplet> triplets;
    triplets.reserve(2 * static_cast<std::size_t>(c.nonZeros()));
    for (Eigen::Index col = 0; col < c.outerSize(); ++col) {
        for (SparseOperator::InnerIterator it(c, col); it; ++it) {
            const double v = sign * it.value();
            triplets.emplace_back(static_cast<int>(it.col()), second + static_cast<int>(it.row()),
                                  v);
            triplets.emplace_back(second + static_cast<int>(it.row()), static_cast<int>(it.col()),
                                  -v);
        }
    }
    out.a = from_triplets(dim, dim, triplets);
    return out;
}

}  // namespace sevo
