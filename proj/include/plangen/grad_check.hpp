#pragma once

#include <functional>
#include <string>
#include <vector>

#include "plangen/tape.hpp"

namespace plangen::ad {

struct GradCheckEntry {
    std::string name;
    double max_abs_diff = 0.0;
    double max_rel_err = 0.0;  // after the absolute floor
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool pass = true;
    double tol = 0.0;
    double abs_floor = 0.0;

    const GradCheckEntry* worst() const;
};

// Central-difference verification of taped gradients.
//
// `f` must rebuild the scalar loss from the parameters' current values on
// the given tape, deterministically (freeze any stochastic inputs). Two
// forward passes are compared bit-for-bit first; disagreement means the
// finite-difference oracle is invalid and an OracleError is thrown.
//
// A parameter entry passes when |taped - fd| <= abs_floor, or the relative
// error |taped - fd| / max(|taped|, |fd|) <= tol.
GradCheckReport grad_check(const std::function<Var(Tape&)>& f,
                           const std::vector<Parameter*>& params, double h, double tol,
                           double abs_floor = 1e-6);

}  // namespace plangen::ad
