#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace mcnsfv {

/// Point in the torus [-1,1)^d; entries beyond d are unused.
using Point = std::array<double, 3>;
/// Small dense vector (velocity, momentum, body force); entries beyond d are unused.
using Vec = std::array<double, 3>;

/// Face between two cells. The normal is +e_axis; `in` sits on the negative
/// side, `out` on the positive side (with periodic wrap).
struct Face {
    int axis;
    std::size_t in;
    std::size_t out;
};

/// A face of one particular cell together with the sign converting the global
/// face orientation to the cell's outward normal.
struct CellFace {
    std::size_t face;
    std::size_t neighbour;
    int axis;
    int sign;  // +1 when the cell is the face's in-cell
};

/// Uniform periodic mesh of the torus ([-1,1]|_{-1,1})^d with n cells per axis.
///
/// Cells are numbered with axis 0 running fastest: index = sum_a i_a n^a.
/// Face `cell * d + a` joins `cell` (in) to its +e_a neighbour (out), so every
/// geometric face appears exactly once.
class TorusMesh {
public:
    TorusMesh(int n, int d);

    int dim() const noexcept { return d_; }
    int cells_per_axis() const noexcept { return n_; }
    double h() const noexcept { return h_; }
    std::size_t num_cells() const noexcept { return num_cells_; }
    std::size_t num_faces() const noexcept { return faces_.size(); }

    double cell_volume() const noexcept { return volume_; }
    double face_area() const noexcept { return area_; }
    /// |T^d| = 2^d.
    double domain_volume() const noexcept;

    const Face& face(std::size_t f) const { return faces_[f]; }
    const std::vector<Face>& faces() const noexcept { return faces_; }

    std::array<int, 3> multi_index(std::size_t cell) const;
    std::size_t cell_index(const std::array<int, 3>& idx) const;
    /// Neighbour across axis `axis` in direction `step` (+1 or -1), periodic.
    std::size_t neighbour(std::size_t cell, int axis, int step) const;
    Point cell_center(std::size_t cell) const;

    /// The 2d faces of `cell` with outward signs, ordered axis by axis (+ then -).
    std::array<CellFace, 6> cell_faces(std::size_t cell) const;

    bool operator==(const TorusMesh& other) const noexcept {
        return d_ == other.d_ && n_ == other.n_;
    }

private:
    int n_;
    int d_;
    double h_;
    double volume_;
    double area_;
    std::size_t num_cells_;
    std::vector<Face> faces_;
};

using MeshPtr = std::shared_ptr<const TorusMesh>;

/// Validates (n, d) and builds a shared immutable mesh.
MeshPtr build_mesh(int n, int d);

/// Gauss-Legendre rule on [-1,1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussRule gauss_legendre(int points);

using ScalarFunction = std::function<double(const Point&)>;
using VectorFunction = std::function<Vec(const Point&)>;

class Field;

/// Cell averages of f by tensor-product Gauss-Legendre quadrature with
/// `points` nodes per axis. Throws DomainError on a non-finite evaluation.
Field project(const ScalarFunction& f, const MeshPtr& mesh, int points = 3);
Field project(const VectorFunction& f, const MeshPtr& mesh, int points = 3);

} // namespace mcnsfv
