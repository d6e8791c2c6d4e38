#include "mcnsfv/operators.hpp"

#include "mcnsfv/errors.hpp"

namespace mcnsfv {

FaceField grad_D(const Field& r) {
    const TorusMesh& mesh = r.mesh();
    const int nc = r.components();
    FaceField g{r.mesh_ptr(), nc, std::vector<double>(mesh.num_faces() * nc)};
    const double inv_h = 1.0 / mesh.h();
    for (std::size_t f = 0; f < mesh.num_faces(); ++f)
        for (int c = 0; c < nc; ++c) g.values[f * nc + c] = jump(r, f, c) * inv_h;
    return g;
}

Field div_h(const Field& v) {
    const TorusMesh& mesh = v.mesh();
    const int d = mesh.dim();
    if (v.components() != d) throw DomainError("div_h: expects a vector field");
    const double scale = mesh.face_area() / mesh.cell_volume();
    Field out(v.mesh_ptr(), 1);
    for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
        const auto faces = mesh.cell_faces(k);
        double sum = 0.0;
        for (int i = 0; i < 2 * d; ++i) {
            const CellFace& cf = faces[i];
            sum += cf.sign * avg(v, cf.face, cf.axis);
        }
        out.at(k) = scale * sum;
    }
    return out;
}

} // namespace mcnsfv
