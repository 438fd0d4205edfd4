#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "stbd/rng.hpp"

using namespace stbd;

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        double va = a.normal(), vb = b.normal(), vc = c.normal();
        all_equal &= (va == vb);
        any_diff |= (va != vc);
    }
    REQUIRE(all_equal);
    REQUIRE(any_diff);
}

TEST_CASE("uniform stays in the unit interval") {
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("gamma moments match shape*scale") {
    Rng r(2);
    const double shape = 3.0, scale = 2.0;
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = r.gamma(shape, scale);
        sum += x;
        sum2 += x * x;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    REQUIRE(mean == Catch::Approx(shape * scale).epsilon(0.02));
    REQUIRE(var == Catch::Approx(shape * scale * scale).epsilon(0.05));
}

TEST_CASE("inverse gamma mean is scale/(shape-1)") {
    // density proportional to x^{-a-1} exp(-lambda/x); mean lambda/(a-1) for a > 1
    Rng r(3);
    const double a = 4.0, lambda = 2.0;
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += r.inverse_gamma(a, lambda);
    REQUIRE(sum / n == Catch::Approx(lambda / (a - 1.0)).epsilon(0.02));
    REQUIRE(r.inverse_gamma(2.0, 0.0) == 0.0);
}

TEST_CASE("poisson mean and edge cases") {
    Rng r(4);
    const int n = 100000;
    long sum = 0;
    for (int i = 0; i < n; ++i) sum += r.poisson(3.0);
    REQUIRE(static_cast<double>(sum) / n == Catch::Approx(3.0).epsilon(0.02));
    REQUIRE(r.poisson(0.0) == 0);
    REQUIRE(r.poisson(-1.0) == 0);
}

TEST_CASE("subset seeds are distinct across indices and masters") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t m = 0; m < 5; ++m)
        for (std::uint64_t q = 0; q < 100; ++q) REQUIRE(seen.insert(subset_seed(m, q)).second);
    REQUIRE(subset_seed(7, 3) == subset_seed(7, 3));
}
