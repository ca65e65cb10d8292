#pragma once

// Dense row-major kernels used by the matching metric and the detector.
//
// Every kernel has two implementations with identical signatures: a plain
// serial loop in `serial` (kept as the reference for tests and benchmarks)
// and an OpenMP version in `parallel`. The parallel kernels split work by
// output row only, so each output element is accumulated in the same order
// as the serial kernel and results are bit-identical for any thread count.

#include <cstddef>
#include <span>

namespace involve::kernels {

// Shapes are given as (rows, cols) of the row-major operands.
struct Dims {
    std::size_t rows = 0;
    std::size_t cols = 0;
};

namespace serial {

// out[i] = max_j <a_i, b_j>. a is (n x d), b is (m x d), out has n entries.
void row_max_inner_products(std::span<const double> a, Dims a_dims, std::span<const double> b,
                            Dims b_dims, std::span<double> out);

// c (n x m) [+]= a (n x k) * b (k x m)
void gemm_nn(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate);

// c (n x m) [+]= a (n x k) * b^T, b is (m x k)
void gemm_nt(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate);

// c (k x m) [+]= a^T * b, a is (n x k), b is (n x m)
void gemm_tn(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate);

}  // namespace serial

namespace parallel {

void row_max_inner_products(std::span<const double> a, Dims a_dims, std::span<const double> b,
                            Dims b_dims, std::span<double> out);
void gemm_nn(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate);
void gemm_nt(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate);
void gemm_tn(std::span<const double> a, Dims a_dims, std::span<const double> b, Dims b_dims,
             std::span<double> c, bool accumulate);

}  // namespace parallel

}  // namespace involve::kernels
