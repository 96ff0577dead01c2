#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <set>
#include <stdexcept>

#include "tsenas/parallel.hpp"
#include "tsenas/rng.hpp"

using namespace tsenas;

TEST_CASE("derive_seed separates streams and indices") {
    std::set<std::uint64_t> seen;
    for (const char* stream : {"data", "train", "run", "search"}) {
        for (std::uint64_t i = 0; i < 50; ++i) {
            seen.insert(derive_seed(42, stream, i));
        }
    }
    CHECK(seen.size() == 200);
    CHECK(derive_seed(1, "x", 3) == derive_seed(1, "x", 3));
    CHECK(derive_seed(1, "x", 3) != derive_seed(2, "x", 3));
}

TEST_CASE("rng draws are reproducible and in range") {
    Rng a(9);
    Rng b(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(a.below(7) == b.below(7));
    }
    Rng c(3);
    auto sample = c.sample_without_replacement(20, 20);
    std::sort(sample.begin(), sample.end());
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(sample[i] == i);
    }
}

TEST_CASE("normal draws have roughly unit moments") {
    Rng rng(5);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("parallel_for fills every slot and rethrows the lowest failure") {
    for (unsigned jobs : {1u, 2u, 4u}) {
        std::vector<int> out(100, 0);
        parallel_for(out.size(), jobs, [&](std::size_t i) { out[i] = static_cast<int>(i) * 2; });
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i] == static_cast<int>(i) * 2);
        }
        try {
            parallel_for(50, jobs, [](std::size_t i) {
                if (i == 7 || i == 30) {
                    throw std::runtime_error(std::to_string(i));
                }
            });
            FAIL("expected an exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "7");
        }
    }
}
