#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ain/gradcheck.hpp"

namespace ain {

/// One named finite-difference comparison. Informational cases (the
/// squared-norm attention rule) are reported but never decide the outcome.
struct GradCheckCase {
    std::string name;
    bool informational = false;
    GradCheckReport report;
};

struct GradCheckSuite {
    std::vector<GradCheckCase> cases;
    bool pass = true;
    double max_rel_err = 0.0;        // over deciding cases
    double informational_max = 0.0;  // over informational cases

    /// Columns: case,parameter,analytic,numeric,rel_err,index,checked,refined,mode.
    void write_csv(std::ostream& out) const;
};

struct GradCheckSuiteOptions {
    std::uint64_t seed = 0;
    double tolerance = 1e-4;
    double step = 1e-5;
    bool layers = true;          // every layer kind in isolation
    bool composed = true;        // 2-LAIL + GAIL network
    bool tiny = true;            // AIN-tiny
    bool speech = false;         // 1-D network (sampled elements)
    std::size_t sampled_elements = 12;  // per parameter in the larger networks
    bool refine_at_kinks = true;        // see GradCheckOptions
};

GradCheckSuite run_gradcheck_suite(const GradCheckSuiteOptions& options);

}  // namespace ain
