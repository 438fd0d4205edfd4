#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stbd/covariance.hpp"
#include "stbd/dataset.hpp"
#include "stbd/rng.hpp"

namespace stbd {

struct TrueParams {
    Vector beta;
    double sigma_eps2 = 0.043;
    double sigma_v2 = 0.083;
    double phi_s = 2.4;
    double phi_t = 0.6;
};

struct CovariateSpec {
    bool include_trend = true;  // normalized linear + quadratic time trend
    int n_extra = 0;            // additional iid N(0,1) covariates
};

struct LatLonBox {
    double lat_min = 51.49, lat_max = 51.53;
    double lon_min = -0.15, lon_max = -0.09;
};

struct TruthRecord {
    TrueParams params;
    Vector V;  // length S*T, location-major, each location's T-block contiguous
};

// Draws a dataset from the model: y = x'beta + v(s,t) + eps, with
// V ~ N(0, sigma_v^2 Sigma_s (x) Sigma_t) and k_ij ~ Poisson(mean_replicates).
inline std::pair<Dataset, TruthRecord> simulate(int S, int T, double mean_replicates,
                                                const TrueParams& params,
                                                const CovariateSpec& spec, std::uint64_t seed,
                                                const LatLonBox& box = {}) {
    if (S < 1 || T < 1) throw std::invalid_argument("simulate: S and T must be positive");
    if (params.sigma_eps2 < 0 || params.sigma_v2 < 0)
        throw std::invalid_argument("simulate: variances must be nonnegative");
    const int m = (spec.include_trend ? 2 : 0) + spec.n_extra;
    if (params.beta.size() != m + 1)
        throw std::invalid_argument("simulate: beta length must be 1 + covariate count");

    Rng rng(seed);
    Dataset ds;
    ds.T = T;
    for (int i = 0; i < S; ++i) {
        Location loc;
        loc.id = "sim" + std::to_string(i);
        loc.lat = box.lat_min + (box.lat_max - box.lat_min) * rng.uniform();
        loc.lon = box.lon_min + (box.lon_max - box.lon_min) * rng.uniform();
        ds.locations.push_back(std::move(loc));
    }
    if (spec.include_trend) {
        ds.covariate_names.push_back("trend_linear");
        ds.covariate_names.push_back("trend_quadratic");
    }
    for (int j = 0; j < spec.n_extra; ++j) ds.covariate_names.push_back("x" + std::to_string(j + 1));

    TruthRecord truth;
    truth.params = params;
    truth.V = Vector::Zero(static_cast<Eigen::Index>(S) * T);
    if (params.sigma_v2 > 0) {
        Matrix Ls = chol_psd(exp_correlation(distance_matrix(ds.locations), params.phi_s)).L;
        Matrix Lt = chol_psd(exp_correlation(lag_matrix(T), params.phi_t)).L;
        Matrix Z(T, S);
        for (int i = 0; i < S; ++i)
            for (int t = 0; t < T; ++t) Z(t, i) = rng.normal();
        Matrix Vm = std::sqrt(params.sigma_v2) * (Lt * Z * Ls.transpose());
        truth.V = Eigen::Map<Vector>(Vm.data(), static_cast<Eigen::Index>(S) * T);
    }

    TimeTrend tt = time_trend_covariates(T);
    const double sd_eps = std::sqrt(params.sigma_eps2);
    for (int i = 0; i < S; ++i) {
        for (int t = 0; t < T; ++t) {
            int k = rng.poisson(mean_replicates);
            for (int r = 0; r < k; ++r) {
                Observation obs;
                obs.location_index = i;
                obs.time_index = t;
                double mean = params.beta(0);
                int b = 1;
                if (spec.include_trend) {
                    obs.covariates.push_back(tt.linear[static_cast<std::size_t>(t)]);
                    obs.covariates.push_back(tt.quadratic[static_cast<std::size_t>(t)]);
                    mean += params.beta(b++) * tt.linear[static_cast<std::size_t>(t)];
                    mean += params.beta(b++) * tt.quadratic[static_cast<std::size_t>(t)];
                }
                for (int j = 0; j < spec.n_extra; ++j) {
                    double x = rng.normal();
                    obs.covariates.push_back(x);
                    mean += params.beta(b++) * x;
                }
                obs.response = mean + truth.V(static_cast<Eigen::Index>(i) * T + t) +
                               sd_eps * rng.normal();
                ds.observations.push_back(std::move(obs));
            }
        }
    }
    return {std::move(ds), std::move(truth)};
}

inline void save_truth(const TruthRecord& truth, const Dataset& ds,
                       const std::string& params_path, const std::string& v_path) {
    std::ofstream out(params_path);
    if (!out) throw std::runtime_error("cannot write " + params_path);
    out.precision(17);
    for (int j = 0; j < truth.params.beta.size(); ++j)
        out << "beta_" << j << " " << truth.params.beta(j) << '\n';
    out << "sigma_eps2 " << truth.params.sigma_eps2 << '\n';
    out << "sigma_v2 " << truth.params.sigma_v2 << '\n';
    out << "phi_s " << truth.params.phi_s << '\n';
    out << "phi_t " << truth.params.phi_t << '\n';

    csv::Writer w(v_path);
    w.row("location_id,time_index,v");
    for (int i = 0; i < ds.S(); ++i)
        for (int t = 0; t < ds.T; ++t)
            w.row(ds.locations[static_cast<std::size_t>(i)].id, t,
                  truth.V(static_cast<Eigen::Index>(i) * ds.T + t));
}

}  // namespace stbd
