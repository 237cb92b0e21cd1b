#pragma once

#include <vector>

#include "lensless/tensor.hpp"

namespace lensless {

/// Per-depth on-axis caustic patterns on the sensor lattice.
/// Each slice is nonnegative and sums to 1.
struct PsfStack {
    std::vector<Image<float>> slices;
    std::vector<double> depth_planes_mm;

    int nz() const { return int(slices.size()); }
    int ny() const { return slices.empty() ? 0 : slices.front().ny; }
    int nx() const { return slices.empty() ? 0 : slices.front().nx; }
};

/// Enforces the stack invariants: matching slice/depth counts, uniform slice
/// shape, nonnegative values, unit sums within sum_tol.
void validate_stack(const PsfStack& stack, double sum_tol = 1e-6);

}  // namespace lensless
