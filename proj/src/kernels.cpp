#include "involve/kernels.h"

#include <algorithm>
#include <limits>

#include <omp.h>

namespace involve::kernels {

namespace {

// Work below this many multiply-adds is not worth a parallel region.
constexpr std::size_t kParallelGrain = 1 << 15;

// Nested calls (e.g. from a per-example parallel loop) stay serial.
inline bool go_parallel(std::size_t work) { return work > kParallelGrain && !omp_in_parallel(); }

inline double dot(const double* x, const double* y, std::size_t d) {
    double s = 0.0;
    for (std::size_t p = 0; p < d; ++p) s += x[p] * y[p];
    return s;
}

inline void max_row(const double* a_row, std::span<const double> b, Dims b_dims, double* out) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b_dims.rows; ++j) {
        best = std::max(best, dot(a_row, b.data() + j * b_dims.cols, b_dims.cols));
    }
    *out = best;
}

inline void nn_row(std::size_t i, std::span<const double> a, Dims a_dims,
                   std::span<const double> b, Dims b_dims, std::span<double> c, bool accumulate) {
    const std::size_t k = a_dims.cols;
    const std::size_t m = b_dims.cols;
    double* crow = c.data() + i * m;
    if (!accumulate) std::fill(crow, crow + m, 0.0);
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* brow = b.data() + p * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
}

inline void nt_row(std::size_t i, std::span<const double> a, Dims a_dims,
                   std::span<const double> b, Dims b_dims, std::span<double> c, bool accumulate) {
    const std::size_t k = a_dims.cols;
    const std::size_t m = b_dims.rows;
    double* crow = c.data() + i * m;
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
        const double s = dot(arow, b.data() + j * k, k);
        crow[j] = accumulate ? crow[j] + s : s;
    }
}

// Row p of a^T * b.
inline void tn_row(std::size_t p, std::span<const double> a, Dims a_dims,
                   std::span<const double> b, Dims b_dims, std::span<double> c, bool accumulate) {
    const std::size_t n = a_dims.rows;
    const std::size_t k = a_dims.cols;
    const std::size_t m = b_dims.cols;
    double* crow = c.data() + p * m;
    if (!accumulate) std::fill(crow, crow + m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double av = a[i * k + p];
        const double* brow = b.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
}

}  // namespace

namespace serial {

void row_max_inner_products(std::span<const double> a, Dims a_dims, std::span<const double> b,
                            Dims b_dims, std::span<double> out) {
    for (std::size_t i = 0; i < a_dims.rows; ++i) {
        max_row(a.data() + i * a_dims.cols, b, b_dims, &out[i]);
    }
}

void gemm_nn(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate) {
    for (std::size_t i = 0; i < a_dims.rows; ++i) nn_row(i, a, a_dims, b, b_dims, c, accumulate);
}

void gemm_nt(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate) {
    for (std::size_t i = 0; i < a_dims.rows; ++i) nt_row(i, a, a_dims, b, b_dims, c, accumulate);
}

void gemm_tn(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate) {
    for (std::size_t p = 0; p < a_dims.cols; ++p) tn_row(p, a, a_dims, b, b_dims, c, accumulate);
}

}  // namespace serial

namespace parallel {

void row_max_inner_products(std::span<const double> a, Dims a_dims, std::span<const double> b,
                            Dims b_dims, std::span<double> out) {
    const auto rows = static_cast<long>(a_dims.rows);
    const bool big = go_parallel(a_dims.rows * b_dims.rows * a_dims.cols);
#pragma omp parallel for schedule(static) if (big)
    for (long i = 0; i < rows; ++i) {
        max_row(a.data() + static_cast<std::size_t>(i) * a_dims.cols, b, b_dims,
                &out[static_cast<std::size_t>(i)]);
    }
}

void gemm_nn(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate) {
    const auto rows = static_cast<long>(a_dims.rows);
    const bool big = go_parallel(a_dims.rows * a_dims.cols * b_dims.cols);
#pragma omp parallel for schedule(static) if (big)
    for (long i = 0; i < rows; ++i) {
        nn_row(static_cast<std::size_t>(i), a, a_dims, b, b_dims, c, accumulate);
    }
}

void gemm_nt(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate) {
    const auto rows = static_cast<long>(a_dims.rows);
    const bool big = go_parallel(a_dims.rows * a_dims.cols * b_dims.rows);
#pragma omp parallel for schedule(static) if (big)
    for (long i = 0; i < rows; ++i) {
        nt_row(static_cast<std::size_t>(i), a, a_dims, b, b_dims, c, accumulate);
    }
}

void gemm_tn(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate) {
    const auto rows = static_cast<long>(a_dims.cols);
    const bool big = go_parallel(a_dims.rows * a_dims.cols * b_dims.cols);
#pragma omp parallel for schedule(static) if (big)
    for (long p = 0; p < rows; ++p) {
        tn_row(static_cast<std::size_t>(p), a, a_dims, b, b_dims, c, accumulate);
    }
}

}  // namespace parallel

}  // namespace involve::kernels
