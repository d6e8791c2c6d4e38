#pragma once

#include <cstddef>
#include <vector>

#include "mcnsfv/field.hpp"

namespace mcnsfv {

/// <v>_sigma = (v_in + v_out) / 2
inline double avg(const Field& v, std::size_t face, int component = 0) {
    const Face& f = v.mesh().face(face);
    return 0.5 * (v.at(f.in, component) + v.at(f.out, component));
}

/// [[v]]_sigma = v_out - v_in
inline double jump(const Field& v, std::size_t face, int component = 0) {
    const Face& f = v.mesh().face(face);
    return v.at(f.out, component) - v.at(f.in, component);
}

/// Face-indexed data, `components` values per face.
struct FaceField {
    MeshPtr mesh;
    int components = 0;
    std::vector<double> values;

    double at(std::size_t face, int c = 0) const { return values[face * components + c]; }
};

/// (grad_D r)_sigma = [[r]] / h along the face normal; one value per face and component.
FaceField grad_D(const Field& r);

/// (div_h v)_K = sum_{sigma in dK} |sigma|/|K| <v> . n_K
Field div_h(const Field& v);

} // namespace mcnsfv
