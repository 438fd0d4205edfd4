#pragma once

#include <cmath>

namespace stbd {

namespace detail {
inline constexpr double kWgs84A = 6378137.0;            // semi-major axis, m
inline constexpr double kWgs84F = 1.0 / 298.257223563;  // flattening
inline constexpr double kWgs84B = kWgs84A * (1.0 - kWgs84F);
inline constexpr double kMeanRadiusKm = 6371.0088;

inline double deg2rad(double d) { return d * M_PI / 180.0; }
}  // namespace detail

// Great-circle distance on a sphere of mean radius, in km.  Used as the
// fallback when the Vincenty iteration does not converge (near-antipodal
// points).
inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    using detail::deg2rad;
    double phi1 = deg2rad(lat1), phi2 = deg2rad(lat2);
    double dphi = deg2rad(lat2 - lat1), dlam = deg2rad(lon2 - lon1);
    double a = std::sin(dphi / 2) * std::sin(dphi / 2) +
               std::cos(phi1) * std::cos(phi2) * std::sin(dlam / 2) * std::sin(dlam / 2);
    return 2.0 * detail::kMeanRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

// Vincenty inverse geodesic distance on the WGS-84 ellipsoid, in km.
inline double vincenty_km(double lat1, double lon1, double lat2, double lon2) {
    using namespace detail;
    if (lat1 == lat2 && lon1 == lon2) return 0.0;

    double U1 = std::atan((1.0 - kWgs84F) * std::tan(deg2rad(lat1)));
    double U2 = std::atan((1.0 - kWgs84F) * std::tan(deg2rad(lat2)));
    double L = deg2rad(lon2 - lon1);
    double sinU1 = std::sin(U1), cosU1 = std::cos(U1);
    double sinU2 = std::sin(U2), cosU2 = std::cos(U2);

    double lambda = L;
    double sinSigma = 0, cosSigma = 0, sigma = 0, cos2Alpha = 0, cos2SigmaM = 0;
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
        double sinLambda = std::sin(lambda), cosLambda = std::cos(lambda);
        double t1 = cosU2 * sinLambda;
        double t2 = cosU1 * sinU2 - sinU1 * cosU2 * cosLambda;
        sinSigma = std::sqrt(t1 * t1 + t2 * t2);
        if (sinSigma == 0.0) return 0.0;  // coincident
        cosSigma = sinU1 * sinU2 + cosU1 * cosU2 * cosLambda;
        sigma = std::atan2(sinSigma, cosSigma);
        double sinAlpha = cosU1 * cosU2 * sinLambda / sinSigma;
        cos2Alpha = 1.0 - sinAlpha * sinAlpha;
        cos2SigmaM = cos2Alpha != 0.0 ? cosSigma - 2.0 * sinU1 * sinU2 / cos2Alpha : 0.0;
        double C = kWgs84F / 16.0 * cos2Alpha * (4.0 + kWgs84F * (4.0 - 3.0 * cos2Alpha));
        double lambdaPrev = lambda;
        lambda = L + (1.0 - C) * kWgs84F * sinAlpha *
                         (sigma + C * sinSigma *
                                      (cos2SigmaM + C * cosSigma * (-1.0 + 2.0 * cos2SigmaM * cos2SigmaM)));
        if (std::abs(lambda - lambdaPrev) < 1e-12) {
            converged = true;
            break;
        }
    }
    if (!converged) return haversine_km(lat1, lon1, lat2, lon2);

    double u2 = cos2Alpha * (kWgs84A * kWgs84A - kWgs84B * kWgs84B) / (kWgs84B * kWgs84B);
    double A = 1.0 + u2 / 16384.0 * (4096.0 + u2 * (-768.0 + u2 * (320.0 - 175.0 * u2)));
    double Bc = u2 / 1024.0 * (256.0 + u2 * (-128.0 + u2 * (74.0 - 47.0 * u2)));
    double deltaSigma =
        Bc * sinSigma *
        (cos2SigmaM + Bc / 4.0 *
                          (cosSigma * (-1.0 + 2.0 * cos2SigmaM * cos2SigmaM) -
                           Bc / 6.0 * cos2SigmaM * (-3.0 + 4.0 * sinSigma * sinSigma) *
                               (-3.0 + 4.0 * cos2SigmaM * cos2SigmaM)));
    return kWgs84B * A * (sigma - deltaSigma) / 1000.0;
}

}  // namespace stbd
