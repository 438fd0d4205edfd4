#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "stbd/combine.hpp"
#include "stbd/diagnostics.hpp"

namespace stbd {

struct Query {
    Location location;  // may be unseen in training
    int time_index = 0; // may exceed training T-1
    std::vector<double> covariates;
};

struct SubsetPrediction {
    double v_mean = 0.0;
    double v_var = 0.0;
    double y_mean = 0.0;
    double y_var = 0.0;
};

struct PredictionRecord {
    std::vector<SubsetPrediction> per_subset;
    double combined_v = 0.0;
    double combined_y = 0.0;
    double combined_y_var = 0.0;  // median of subset variances
};

// Plug-in parameter estimates for one subset: posterior means, decay
// parameters snapped to the nearest grid point for table reuse.
struct SubsetEstimates {
    Vector beta;
    double sigma_eps2 = 0.0;
    double sigma_v2 = 0.0;
    int phi_s_idx = 0;
    int phi_t_idx = 0;
};

inline SubsetEstimates subset_estimates(const SubsetFit& fit, const GridTables& tables) {
    const int nb = static_cast<int>(fit.mu_hat.size()) - 4;
    SubsetEstimates est;
    est.beta = fit.mu_hat.head(nb);
    est.sigma_eps2 = fit.mu_hat(nb);
    est.sigma_v2 = fit.mu_hat(nb + 1);
    est.phi_s_idx = tables.nearest_phi_s(fit.mu_hat(nb + 2));
    est.phi_t_idx = tables.nearest_phi_t(fit.mu_hat(nb + 3));
    return est;
}

// GP prediction of the latent field at (s', t') from one subset, using the
// subset's inverse spatial block and the plug-in estimates.
inline std::pair<double, double> predict_v_subset(const SubsetFit& fit, const GridTables& tables,
                                                  const Dataset& ds, const Query& query,
                                                  const SubsetEstimates& est,
                                                  int* floor_count = nullptr) {
    const int T = fit.design.T;
    const int mq = fit.design.m_q();
    const auto& sp = tables.spatial[static_cast<std::size_t>(est.phi_s_idx)]
                         .subsets[static_cast<std::size_t>(fit.subset_index)];
    const auto& tp = tables.temporal[static_cast<std::size_t>(est.phi_t_idx)];
    const double phi_s = tables.phi_s_grid[static_cast<std::size_t>(est.phi_s_idx)];
    const double phi_t = tables.phi_t_grid[static_cast<std::size_t>(est.phi_t_idx)];

    Vector a(mq), b(T);
    for (int i = 0; i < mq; ++i) {
        const Location& loc =
            ds.locations[static_cast<std::size_t>(fit.design.subset_locs[static_cast<std::size_t>(i)])];
        a(i) = std::exp(-phi_s * vincenty_km(loc.lat, loc.lon, query.location.lat,
                                             query.location.lon));
    }
    for (int t = 0; t < T; ++t) b(t) = std::exp(-phi_t * std::abs(t - query.time_index));

    // cross covariance row is a (x) b in the location-major layout
    Vector sigma_prime(static_cast<Eigen::Index>(mq) * T);
    for (int i = 0; i < mq; ++i)
        sigma_prime.segment(static_cast<Eigen::Index>(i) * T, T) = a(i) * b;

    Vector u = kron_pair_solve(sp.tilde_inv, tp.sigma_inv, fit.chain.v_mean);
    double mean = sigma_prime.dot(u);
    Vector w = kron_pair_solve(sp.tilde_inv, tp.sigma_inv, sigma_prime);
    double var = est.sigma_v2 * (1.0 - sigma_prime.dot(w));
    if (var < 0.0) {
        if (floor_count) ++(*floor_count);
        var = 0.0;
    }
    return {mean, var};
}

inline std::pair<double, double> predict_y_subset(const SubsetFit& fit, const Query& query,
                                                  const SubsetEstimates& est, double v_mean,
                                                  double v_var) {
    if (static_cast<int>(query.covariates.size()) + 1 != est.beta.size())
        throw std::invalid_argument("predict_y_subset: covariate length mismatch");
    double mean = est.beta(0);
    for (std::size_t j = 0; j < query.covariates.size(); ++j)
        mean += est.beta(static_cast<Eigen::Index>(j) + 1) * query.covariates[j];
    mean += v_mean;
    return {mean, v_var + est.sigma_eps2};
}

namespace detail {
// lower-middle convention for even counts
inline double median_lower(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}
}  // namespace detail

inline PredictionRecord predict_combined(const DnCFit& fit, const Dataset& ds, const Query& query,
                                         int* floor_count = nullptr) {
    if (fit.fits.empty()) throw std::invalid_argument("predict_combined: no fits");
    PredictionRecord rec;
    std::vector<double> v_means, y_means, y_vars;
    for (const auto& f : fit.fits) {
        SubsetEstimates est = subset_estimates(f, fit.tables);
        auto [vm, vv] = predict_v_subset(f, fit.tables, ds, query, est, floor_count);
        auto [ym, yv] = predict_y_subset(f, query, est, vm, vv);
        rec.per_subset.push_back({vm, vv, ym, yv});
        v_means.push_back(vm);
        y_means.push_back(ym);
        y_vars.push_back(yv);
    }
    rec.combined_v = detail::median_lower(v_means);
    rec.combined_y = detail::median_lower(y_means);
    rec.combined_y_var = detail::median_lower(y_vars);
    return rec;
}

struct BatchPrediction {
    std::vector<PredictionRecord> records;
    MetricsReport metrics;
    int variance_floor_count = 0;
};

inline BatchPrediction predict_batch(const DnCFit& fit, const Dataset& train_ds,
                                     const Dataset& test_ds) {
    if (test_ds.observations.empty())
        throw std::invalid_argument("predict_batch: empty test set, metrics undefined");
    BatchPrediction out;
    std::vector<double> truth, pred;
    for (const auto& obs : test_ds.observations) {
        Query q;
        q.location = test_ds.locations[static_cast<std::size_t>(obs.location_index)];
        q.time_index = obs.time_index;
        q.covariates = obs.covariates;
        out.records.push_back(predict_combined(fit, train_ds, q, &out.variance_floor_count));
        truth.push_back(obs.response);
        pred.push_back(out.records.back().combined_y);
    }
    out.metrics = metrics(truth, pred);
    return out;
}

}  // namespace stbd
