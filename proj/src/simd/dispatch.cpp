#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string_view>

#include "hkdelay/errors.hpp"
#include "hkdelay/simd/pairwise.hpp"

namespace hkd::simd {

namespace {

constexpr KernelTable kScalarTable{Isa::scalar, &scalar::interaction, &scalar::squared_distances,
                                   &scalar::max_squared_distance};
#if defined(HKD_HAVE_AVX2)
constexpr KernelTable kAvx2Table{Isa::avx2, &avx2::interaction, &avx2::squared_distances,
                                 &avx2::max_squared_distance};
#endif

Isa initial_isa() noexcept {
    Isa isa = detected_isa();
    if (const char* env = std::getenv("HKD_SIMD")) {
        const std::string_view v(env);
        if (v == "scalar") isa = Isa::scalar;
        else if (v == "avx2" && isa_supported(Isa::avx2)) isa = Isa::avx2;
    }
    return isa;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

bool isa_supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(HKD_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

Isa detected_isa() noexcept { return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (!isa_supported(isa)) throw UnsupportedInstance("SIMD variant " + to_string(isa) + " not supported here");
    current().store(isa, std::memory_order_relaxed);
}

const KernelTable& kernels_for(Isa isa) {
    if (!isa_supported(isa)) throw UnsupportedInstance("SIMD variant " + to_string(isa) + " not supported here");
#if defined(HKD_HAVE_AVX2)
    if (isa == Isa::avx2) return kAvx2Table;
#endif
    return kScalarTable;
}

const KernelTable& kernels() noexcept {
#if defined(HKD_HAVE_AVX2)
    if (active_isa() == Isa::avx2) return kAvx2Table;
#endif
    return kScalarTable;
}

std::string to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

InteractionSums interaction_sums(const InfluenceKernel& kernel, PointsView pts, const double* target,
                                 std::size_t skip) {
    InteractionSums out;
    out.weighted.assign(pts.dim, 0.0);
    std::vector<double> scratch(pts.count);
    kernels().interaction(kernel, pts, target, skip, scratch.data(), out.weighted.data(), &out.psi_total);
    return out;
}

double max_distance_from(PointsView pts, const double* target) {
    return std::sqrt(kernels().max_squared_distance(pts, target));
}

}  // namespace hkd::simd
