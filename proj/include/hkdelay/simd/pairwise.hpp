#pragma once

// Pairwise inner loops of the model: for a target point p and a cloud of
// points y_0..y_{n-1}, accumulate influence-weighted displacements or
// distances. One scalar reference implementation plus vectorized variants;
// the variant is picked once at runtime from the CPU features and can be
// forced (HKD_SIMD=scalar or set_isa) for equivalence testing.
//
// Points are stored coordinate-major: coordinate c of point j lives at
// data[c * stride + j].

#include <cstddef>
#include <string>
#include <vector>

#include "hkdelay/kernels.hpp"

namespace hkd::simd {

enum class Isa { scalar, avx2 };

struct PointsView {
    const double* data = nullptr;
    std::size_t count = 0;
    std::size_t dim = 0;
    std::size_t stride = 0;

    const double* coord(std::size_t c) const noexcept { return data + c * stride; }
};

/// Coordinate-major point cloud owning its storage.
class PointCloud {
public:
    PointCloud() = default;
    PointCloud(std::size_t count, std::size_t dim) { resize(count, dim); }

    void resize(std::size_t count, std::size_t dim) {
        count_ = count;
        dim_ = dim;
        data_.assign(count * dim, 0.0);
    }

    /// Fill from an agent-major (row-major N x d) array.
    void assign_rows(const double* rows, std::size_t count, std::size_t dim);

    double& at(std::size_t j, std::size_t c) noexcept { return data_[c * count_ + j]; }
    double at(std::size_t j, std::size_t c) const noexcept { return data_[c * count_ + j]; }
    double* coord(std::size_t c) noexcept { return data_.data() + c * count_; }

    std::size_t count() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    PointsView view() const noexcept { return {data_.data(), count_, dim_, count_}; }

private:
    std::vector<double> data_;
    std::size_t count_ = 0;
    std::size_t dim_ = 0;
};

/// Result of an interaction sweep.
///   weighted[c] = sum_{j != skip} psi(|y_j - p|) * (y_{j,c} - p_c)
///   psi_total   = sum_{all j}     psi(|y_j - p|)
struct InteractionSums {
    std::vector<double> weighted;
    double psi_total = 0.0;
};

/// scratch must hold at least pts.count doubles.
using InteractionFn = void (*)(const InfluenceKernel& kernel, PointsView pts, const double* target,
                               std::size_t skip, double* scratch, double* weighted, double* psi_total);
using SquaredDistancesFn = void (*)(PointsView pts, const double* target, double* out);
using MaxSquaredDistanceFn = double (*)(PointsView pts, const double* target);

struct KernelTable {
    Isa isa;
    InteractionFn interaction;
    SquaredDistancesFn squared_distances;
    MaxSquaredDistanceFn max_squared_distance;
};

/// Pass `skip >= pts.count` to include every point in `weighted`.
inline constexpr std::size_t kNoSkip = static_cast<std::size_t>(-1);

namespace scalar {
void interaction(const InfluenceKernel& kernel, PointsView pts, const double* target, std::size_t skip,
                 double* scratch, double* weighted, double* psi_total);
void squared_distances(PointsView pts, const double* target, double* out);
double max_squared_distance(PointsView pts, const double* target);
}  // namespace scalar

#if defined(HKD_HAVE_AVX2)
namespace avx2 {
void interaction(const InfluenceKernel& kernel, PointsView pts, const double* target, std::size_t skip,
                 double* scratch, double* weighted, double* psi_total);
void squared_distances(PointsView pts, const double* target, double* out);
double max_squared_distance(PointsView pts, const double* target);
}  // namespace avx2
#endif

/// Best variant the running CPU supports.
Isa detected_isa() noexcept;
/// Variant currently in use. Defaults to detected_isa() unless the
/// HKD_SIMD environment variable names another supported variant.
Isa active_isa() noexcept;
/// Force a variant; throws UnsupportedInstance when the CPU lacks it.
void set_isa(Isa isa);
bool isa_supported(Isa isa) noexcept;
const KernelTable& kernels() noexcept;
const KernelTable& kernels_for(Isa isa);
std::string to_string(Isa isa);

/// Convenience wrappers over the active table.
InteractionSums interaction_sums(const InfluenceKernel& kernel, PointsView pts, const double* target,
                                 std::size_t skip);
double max_distance_from(PointsView pts, const double* target);

}  // namespace hkd::simd
