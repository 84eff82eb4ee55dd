#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mfvol {

struct NelderMeadOptions {
    std::size_t max_iterations = 500;
    /// Stop when the simplex characteristic size falls below this.
    double size_tolerance = 1e-4;
    /// Initial simplex step per coordinate; defaults to 0.1 everywhere.
    std::vector<double> initial_step;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Minimises f with the GSL nmsimplex2 method.  Non-finite objective values
/// are mapped to a large penalty.  on_iteration, when set, sees the current
/// best point after every simplex step.
NelderMeadResult nelder_mead(
    const std::function<double(std::span<const double>)>& f, std::span<const double> start,
    const NelderMeadOptions& opts = {},
    const std::function<void(std::size_t, std::span<const double>, double)>& on_iteration = {});

} // namespace mfvol
