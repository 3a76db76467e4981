// AVX2 variants of the pairwise kernels. Compiled with -mavx2 -mfma and only
// called after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "hkdelay/simd/pairwise.hpp"

namespace hkd::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d m = _mm_max_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

// Squared distances of points [0, n) to target, into out.
void fill_squared(PointsView pts, const double* target, double* out) {
    const std::size_t n = pts.count;
    const std::size_t d = pts.dim;
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t j = 0; j < n4; j += 4) {
        __m256d r2 = _mm256_setzero_pd();
        for (std::size_t c = 0; c < d; ++c) {
            const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(pts.coord(c) + j), _mm256_set1_pd(target[c]));
            r2 = _mm256_add_pd(r2, _mm256_mul_pd(diff, diff));
        }
        _mm256_storeu_pd(out + j, r2);
    }
    for (std::size_t j = n4; j < n; ++j) {
        double r2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = pts.coord(c)[j] - target[c];
            r2 += diff * diff;
        }
        out[j] = r2;
    }
}

// Overwrites squared distances in buf with psi values.
void apply_psi(const InfluenceKernel& kernel, double* buf, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t{3};
    switch (kernel.family()) {
        case KernelFamily::constant:
            std::fill(buf, buf + n, 1.0);
            return;
        case KernelFamily::power_law: {
            const double g = kernel.parameter();
            const bool small_int = g == std::floor(g) && g >= 1.0 && g <= 16.0;
            if (!small_int) break;
            const int k = static_cast<int>(g);
            const __m256d one = _mm256_set1_pd(1.0);
            for (std::size_t j = 0; j < n4; j += 4) {
                const __m256d inv = _mm256_div_pd(one, _mm256_add_pd(one, _mm256_loadu_pd(buf + j)));
                __m256d acc = one;
                __m256d base = inv;
                for (int e = k; e > 0; e >>= 1) {
                    if (e & 1) acc = _mm256_mul_pd(acc, base);
                    base = _mm256_mul_pd(base, base);
                }
                _mm256_storeu_pd(buf + j, acc);
            }
            for (std::size_t j = n4; j < n; ++j) buf[j] = kernel.from_squared(buf[j]);
            return;
        }
        case KernelFamily::exponential: {
            const double rate = kernel.parameter();
            alignas(32) double r[4];
            for (std::size_t j = 0; j < n4; j += 4) {
                _mm256_store_pd(r, _mm256_sqrt_pd(_mm256_loadu_pd(buf + j)));
                for (int l = 0; l < 4; ++l) buf[j + l] = std::exp(-rate * r[l]);
            }
            for (std::size_t j = n4; j < n; ++j) buf[j] = kernel.from_squared(buf[j]);
            return;
        }
    }
    for (std::size_t j = 0; j < n; ++j) buf[j] = kernel.from_squared(buf[j]);
}

}  // namespace

void interaction(const InfluenceKernel& kernel, PointsView pts, const double* target, std::size_t skip,
                 double* scratch, double* weighted, double* psi_total) {
    const std::size_t n = pts.count;
    const std::size_t d = pts.dim;
    const std::size_t n4 = n & ~std::size_t{3};

    fill_squared(pts, target, scratch);
    apply_psi(kernel, scratch, n);

    __m256d tot = _mm256_setzero_pd();
    for (std::size_t j = 0; j < n4; j += 4) tot = _mm256_add_pd(tot, _mm256_loadu_pd(scratch + j));
    double total = hsum(tot);
    for (std::size_t j = n4; j < n; ++j) total += scratch[j];
    *psi_total = total;

    if (skip < n) scratch[skip] = 0.0;

    for (std::size_t c = 0; c < d; ++c) {
        const double* y = pts.coord(c);
        const __m256d p = _mm256_set1_pd(target[c]);
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t j = 0; j < n4; j += 4) {
            const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(y + j), p);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(scratch + j), diff));
        }
        double s = hsum(acc);
        for (std::size_t j = n4; j < n; ++j) s += scratch[j] * (y[j] - target[c]);
        weighted[c] = s;
    }
}

void squared_distances(PointsView pts, const double* target, double* out) {
    fill_squared(pts, target, out);
}

double max_squared_distance(PointsView pts, const double* target) {
    const std::size_t n = pts.count;
    const std::size_t d = pts.dim;
    const std::size_t n4 = n & ~std::size_t{3};
    __m256d best = _mm256_setzero_pd();
    for (std::size_t j = 0; j < n4; j += 4) {
        __m256d r2 = _mm256_setzero_pd();
        for (std::size_t c = 0; c < d; ++c) {
            const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(pts.coord(c) + j), _mm256_set1_pd(target[c]));
            r2 = _mm256_add_pd(r2, _mm256_mul_pd(diff, diff));
        }
        best = _mm256_max_pd(best, r2);
    }
    double out = hmax(best);
    for (std::size_t j = n4; j < n; ++j) {
        double r2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = pts.coord(c)[j] - target[c];
            r2 += diff * diff;
        }
        out = std::max(out, r2);
    }
    return out;
}

}  // namespace hkd::simd::avx2
