#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "stbd/geodesic.hpp"

using namespace stbd;

TEST_CASE("vincenty equator and meridian anchors") {
    // one degree of longitude along the equator: a * pi / 180
    REQUIRE(vincenty_km(0, 0, 0, 1) == Catch::Approx(111.3195).margin(0.001));
    // one degree of latitude from the equator (WGS-84 meridian arc)
    REQUIRE(vincenty_km(0, 0, 1, 0) == Catch::Approx(110.5748).margin(0.001));
    // quarter meridian, pole to equator: 10001.966 km
    REQUIRE(vincenty_km(0, 0, 90, 0) == Catch::Approx(10001.9657).margin(0.01));
}

TEST_CASE("vincenty zero for coincident points, symmetric, positive") {
    REQUIRE(vincenty_km(51.5, -0.1, 51.5, -0.1) == 0.0);
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> lat(-80, 80), lon(-180, 180);
    for (int rep = 0; rep < 50; ++rep) {
        double a1 = lat(gen), o1 = lon(gen), a2 = lat(gen), o2 = lon(gen);
        double d12 = vincenty_km(a1, o1, a2, o2);
        double d21 = vincenty_km(a2, o2, a1, o1);
        REQUIRE(d12 == Catch::Approx(d21).margin(1e-9));
        REQUIRE(d12 >= 0.0);
    }
}

TEST_CASE("vincenty agrees with haversine within ellipsoidal flattening") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> lat(-60, 60), lon(-180, 180);
    for (int rep = 0; rep < 50; ++rep) {
        double a1 = lat(gen), o1 = lon(gen), a2 = lat(gen), o2 = lon(gen);
        double dv = vincenty_km(a1, o1, a2, o2);
        double dh = haversine_km(a1, o1, a2, o2);
        if (dh < 1.0) continue;
        REQUIRE(std::abs(dv - dh) / dh < 0.006);  // flattening is ~1/298
    }
}

TEST_CASE("geodesic triangle inequality") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> lat(51.3, 51.7), lon(-0.5, 0.3);
    for (int rep = 0; rep < 30; ++rep) {
        double a1 = lat(gen), o1 = lon(gen);
        double a2 = lat(gen), o2 = lon(gen);
        double a3 = lat(gen), o3 = lon(gen);
        double d12 = vincenty_km(a1, o1, a2, o2);
        double d23 = vincenty_km(a2, o2, a3, o3);
        double d13 = vincenty_km(a1, o1, a3, o3);
        REQUIRE(d13 <= d12 + d23 + 1e-9);
    }
}

TEST_CASE("near-antipodal points fall back without blowing up") {
    double d = vincenty_km(0.0, 0.0, 0.5, 179.7);
    REQUIRE(std::isfinite(d));
    REQUIRE(d > 19000.0);
    REQUIRE(d < 20100.0);
}
