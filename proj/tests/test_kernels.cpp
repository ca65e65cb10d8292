#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <vector>

#include <omp.h>

#include "involve/kernels.h"
#include "involve/rng.h"

namespace involve {
namespace {

using kernels::Dims;

std::vector<double> random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    std::vector<double> m(r * c);
    for (double& v : m) v = rng.normal();
    return m;
}

TEST(Kernels, RowMaxMatchesDirectLoop) {
    Rng rng(1);
    const std::size_t n = 7, m = 5, d = 9;
    const auto a = random_matrix(rng, n, d);
    const auto b = random_matrix(rng, m, d);
    std::vector<double> out(n);
    kernels::serial::row_max_inner_products(a, {n, d}, b, {m, d}, out);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < d; ++k) s += a[i * d + k] * b[j * d + k];
            best = std::max(best, s);
        }
        EXPECT_NEAR(out[i], best, 1e-12);
    }
}

TEST(Kernels, GemmVariantsAgreeWithNaiveProduct) {
    Rng rng(2);
    const std::size_t n = 6, k = 4, m = 5;
    const auto a = random_matrix(rng, n, k);
    const auto b = random_matrix(rng, k, m);
    std::vector<double> ref(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t p = 0; p < k; ++p) ref[i * m + j] += a[i * k + p] * b[p * m + j];

    std::vector<double> c(n * m);
    kernels::serial::gemm_nn(a, {n, k}, b, {k, m}, c, false);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-12);

    // b^T stored explicitly, then a * (b^T)^T
    std::vector<double> bt(m * k);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = b[p * m + j];
    kernels::serial::gemm_nt(a, {n, k}, bt, {m, k}, c, false);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-12);

    // a^T stored explicitly, then (a^T)^T * b
    std::vector<double> at(k * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) at[p * n + i] = a[i * k + p];
    kernels::serial::gemm_tn(at, {k, n}, b, {k, m}, c, false);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-12);

    // accumulate adds on top
    kernels::serial::gemm_nn(a, {n, k}, b, {k, m}, c, true);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], 2 * ref[i], 1e-12);
}

// Large enough to take the parallel path; results must be bit-identical.
TEST(Kernels, ParallelBitIdenticalToSerial) {
    Rng rng(3);
    const std::size_t n = 300, k = 64, m = 128;
    const auto a = random_matrix(rng, n, k);
    const auto b = random_matrix(rng, k, m);
    const auto bt = random_matrix(rng, m, k);
    const auto c2 = random_matrix(rng, n, m);
    for (int threads : {1, 2, 4}) {
        omp_set_num_threads(threads);
        std::vector<double> s(n * m), p(n * m);
        kernels::serial::gemm_nn(a, {n, k}, b, {k, m}, s, false);
        kernels::parallel::gemm_nn(a, {n, k}, b, {k, m}, p, false);
        EXPECT_EQ(s, p);
        kernels::serial::gemm_nt(a, {n, k}, bt, {m, k}, s, false);
        kernels::parallel::gemm_nt(a, {n, k}, bt, {m, k}, p, false);
        EXPECT_EQ(s, p);
        std::vector<double> st(k * m), pt(k * m);
        kernels::serial::gemm_tn(a, {n, k}, c2, {n, m}, st, false);
        kernels::parallel::gemm_tn(a, {n, k}, c2, {n, m}, pt, false);
        EXPECT_EQ(st, pt);
        std::vector<double> rs(n), rp(n);
        kernels::serial::row_max_inner_products(a, {n, k}, bt, {m, k}, rs);
        kernels::parallel::row_max_inner_products(a, {n, k}, bt, {m, k}, rp);
        EXPECT_EQ(rs, rp);
    }
}

}  // namespace
}  // namespace involve
