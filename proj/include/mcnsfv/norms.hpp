#pragma once

#include <functional>

#include "mcnsfv/field.hpp"

namespace mcnsfv {

/// (sum_K |K| |v_K|^p)^(1/p); vector fields use the cellwise Euclidean norm.
double lp_norm(const Field& v, double p);
double linf_norm(const Field& v);

/// |grad_D v|_{L^2} with |grad_D v|^2 = sum_sigma |sigma| h |[[v]]/h|^2.
double w12_seminorm(const Field& v);

/// L^2 inner product sum_K |K| v_K . w_K.
double l2_inner(const Field& v, const Field& w);

using StateNorm = std::function<double(const State&)>;

/// L^r(0,T; X) norm of the piecewise-constant-in-time trajectory; level k is
/// held on [t_k, t_{k+1}).
double bochner_norm(const Trajectory& traj, double r, const StateNorm& spatial);

/// W^{-k,2} norm from the DFT of cell values: sum_xi (1 + |pi xi|^2)^{-k} |v^(xi)|^2,
/// with v^ normalised so that the zero-weight sum reproduces the L^2 norm.
double neg_sobolev_norm(const Field& v, int k);

} // namespace mcnsfv
