#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emk/backend.hpp"
#include "emk/kernels.hpp"

#include <cmath>
#include <vector>

using namespace emk;

namespace {

std::vector<double> random_vector(std::size_t n, NormalSampler& rng) {
    std::vector<double> v(n);
    for (auto& x : v)
        x = rng.next();
    return v;
}

} // namespace

TEST_CASE("scalar primitives against plain arithmetic") {
    NormalSampler rng(1);
    const auto a = random_vector(97, rng);
    const auto b = random_vector(97, rng);

    double expected_dot = 0.0;
    double expected_sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        expected_dot += a[i] * b[i];
        expected_sq += a[i] * a[i];
    }
    CHECK(kern::scalar::dot(a.data(), b.data(), a.size()) ==
          doctest::Approx(expected_dot).epsilon(1e-14));
    CHECK(kern::scalar::sum_sq(a.data(), a.size()) ==
          doctest::Approx(expected_sq).epsilon(1e-14));

    auto y = b;
    kern::scalar::axpy(0.37, a.data(), y.data(), y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y[i] == doctest::Approx(b[i] + 0.37 * a[i]).epsilon(1e-14));
}

TEST_CASE("dispatched variants agree with the scalar reference") {
    const kern::Isa initial = kern::active_isa();
    NormalSampler rng(2);

    // Remainder handling matters: cover lengths around the vector widths.
    const std::size_t lengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 64, 133, 1024, 1031};
    for (const kern::Isa isa : {kern::Isa::scalar, kern::Isa::avx2, kern::Isa::neon}) {
        if (!kern::isa_available(isa))
            continue;
        kern::use_isa(isa);
        for (std::size_t n : lengths) {
            const auto a = random_vector(n, rng);
            const auto b = random_vector(n, rng);
            const double want_dot = kern::scalar::dot(a.data(), b.data(), n);
            const double want_sq = kern::scalar::sum_sq(a.data(), n);
            const double tol = 1e-12 * (1.0 + std::abs(want_dot) + static_cast<double>(n));
            CHECK(std::abs(kern::dot(a.data(), b.data(), n) - want_dot) <= tol);
            CHECK(std::abs(kern::sum_sq(a.data(), n) - want_sq) <= tol);

            auto got = b;
            auto want = b;
            kern::axpy(-1.7, a.data(), got.data(), n);
            kern::scalar::axpy(-1.7, a.data(), want.data(), n);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
        }
    }
    kern::use_isa(initial);
}

TEST_CASE("isa selection") {
    CHECK(kern::isa_available(kern::Isa::scalar));
    const kern::Isa initial = kern::active_isa();

    kern::use_isa(kern::Isa::scalar);
    CHECK(kern::active_isa() == kern::Isa::scalar);

    for (const kern::Isa isa : {kern::Isa::avx2, kern::Isa::neon}) {
        if (kern::isa_available(isa)) {
            kern::use_isa(isa);
            CHECK(kern::active_isa() == isa);
        } else {
            CHECK_THROWS_AS(kern::use_isa(isa), std::invalid_argument);
        }
    }
    kern::use_isa(initial);
}

TEST_CASE("gemv and outer_acc compose the primitives correctly") {
    NormalSampler rng(3);
    const std::size_t rows = 5;
    const std::size_t cols = 11;
    const auto m = random_vector(rows * cols, rng);
    const auto x = random_vector(cols, rng);

    std::vector<double> y(rows);
    kern::gemv(m.data(), rows, cols, x.data(), y.data());
    for (std::size_t r = 0; r < rows; ++r) {
        double want = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            want += m[r * cols + c] * x[c];
        CHECK(y[r] == doctest::Approx(want).epsilon(1e-13));
    }

    const auto u = random_vector(rows, rng);
    const auto v = random_vector(cols, rng);
    std::vector<double> acc(rows * cols, 0.5);
    kern::outer_acc(2.0, u.data(), rows, v.data(), cols, acc.data());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            CHECK(acc[r * cols + c] == doctest::Approx(0.5 + 2.0 * u[r] * v[c]).epsilon(1e-13));
}
