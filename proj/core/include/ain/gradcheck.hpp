#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <type_traits>
#include <vector>

#include "ain/autodiff.hpp"

namespace ain {

/// Scalar type for finite-difference checks: x87 extended precision, so the
/// rounding floor of a central difference sits far below the tolerances used.
using Extended = long double;

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Checks at most this many randomly chosen elements per parameter; 0 checks all.
    std::size_t max_elements_per_param = 0;
    std::uint64_t seed = 0;
    /// Re-measures a failing element with steps h/100 and h/10^4. A kink (ReLU,
    /// max) inside the stencil disappears as the step shrinks; a wrong tape
    /// gradient does not, so refinement cannot hide one.
    bool refine_at_kinks = true;
};

/// Worst element of one parameter tensor.
struct GradCheckRow {
    std::string name;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
    std::size_t checked = 0;
    std::size_t refined = 0;  // elements re-measured at a kink
};

struct GradCheckReport {
    std::vector<GradCheckRow> rows;
    double max_rel_err = 0.0;
    bool pass = true;
    bool finite = true;
    std::string failure;

    /// Columns: parameter,analytic,numeric,rel_err,index,checked,refined.
    void write_csv(std::ostream& out, bool header = true) const;
};

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

/// Compares tape gradients of `loss` against central differences
/// (f(p + h e_i) - f(p - h e_i)) / 2h for every element of `params`.
/// `loss` must be deterministic; it is re-evaluated twice per checked element.
template <typename T = Extended>
GradCheckReport finite_diff_check(const std::type_identity_t<std::function<Var<T>()>>& loss, std::vector<Parameter<T>> params,
                                  const GradCheckOptions& options = {});

}  // namespace ain
