// Scalar reference kernels. Every vectorized variant is tested against these.

#include <algorithm>
#include <cmath>

#include "hkdelay/simd/pairwise.hpp"

namespace hkd::simd {

void PointCloud::assign_rows(const double* rows, std::size_t count, std::size_t dim) {
    resize(count, dim);
    for (std::size_t j = 0; j < count; ++j)
        for (std::size_t c = 0; c < dim; ++c) data_[c * count + j] = rows[j * dim + c];
}

namespace scalar {

void interaction(const InfluenceKernel& kernel, PointsView pts, const double* target, std::size_t skip,
                 double* /*scratch*/, double* weighted, double* psi_total) {
    const std::size_t n = pts.count;
    const std::size_t d = pts.dim;
    for (std::size_t c = 0; c < d; ++c) weighted[c] = 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double r2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = pts.coord(c)[j] - target[c];
            r2 += diff * diff;
        }
        const double w = kernel.from_squared(r2);
        total += w;
        if (j == skip) continue;
        for (std::size_t c = 0; c < d; ++c) weighted[c] += w * (pts.coord(c)[j] - target[c]);
    }
    *psi_total = total;
}

void squared_distances(PointsView pts, const double* target, double* out) {
    for (std::size_t j = 0; j < pts.count; ++j) {
        double r2 = 0.0;
        for (std::size_t c = 0; c < pts.dim; ++c) {
            const double diff = pts.coord(c)[j] - target[c];
            r2 += diff * diff;
        }
        out[j] = r2;
    }
}

double max_squared_distance(PointsView pts, const double* target) {
    double best = 0.0;
    for (std::size_t j = 0; j < pts.count; ++j) {
        double r2 = 0.0;
        for (std::size_t c = 0; c < pts.dim; ++c) {
            const double diff = pts.coord(c)[j] - target[c];
            r2 += diff * diff;
        }
        best = std::max(best, r2);
    }
    return best;
}

}  // namespace scalar
}  // namespace hkd::simd
