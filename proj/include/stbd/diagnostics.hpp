#pragma once

#include <algorithm>
#include <limits>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stbd/covariance.hpp"
#include "stbd/dataset.hpp"

namespace stbd {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Acklam's rational approximation, |error| < 1.15e-9.
inline double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("normal_quantile: p in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

struct MoranResult {
    double I = 0.0;
    double expected = 0.0;  // -1/(S-1)
    double z = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    double alpha = 0.01;
    bool significant = false;
};

// Moran's I with weights w_ij = exp(-d_ij), zero diagonal, no row
// normalization.  Inference via the normal approximation under the
// randomization assumption (needs S >= 4).
inline MoranResult morans_i(const std::vector<double>& values, const Matrix& D, double alpha = 0.01) {
    const int n = static_cast<int>(values.size());
    if (n < 2 || D.rows() != n) throw std::invalid_argument("morans_i: bad input sizes");

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double denom = 0.0, m4 = 0.0;
    for (double v : values) {
        double dev = v - mean;
        denom += dev * dev;
        m4 += dev * dev * dev * dev;
    }
    if (denom == 0.0) throw std::runtime_error("morans_i: constant values");

    double num = 0.0, SW = 0.0, S1 = 0.0;
    std::vector<double> rowsum(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double w = std::exp(-D(i, j));
            num += w * (values[static_cast<std::size_t>(i)] - mean) *
                   (values[static_cast<std::size_t>(j)] - mean);
            SW += w;
            S1 += 0.5 * (2.0 * w) * (2.0 * w);  // (w_ij + w_ji)^2 / 2 per ordered pair
            rowsum[static_cast<std::size_t>(i)] += w;
        }

    MoranResult res;
    res.alpha = alpha;
    res.I = (n / SW) * (num / denom);
    res.expected = -1.0 / (n - 1);

    if (n >= 4) {
        double S2 = 0.0;
        for (int i = 0; i < n; ++i)
            S2 += (2.0 * rowsum[static_cast<std::size_t>(i)]) *
                  (2.0 * rowsum[static_cast<std::size_t>(i)]);
        double b2 = n * m4 / (denom * denom);
        double nn = n;
        double var = (nn * ((nn * nn - 3 * nn + 3) * S1 - nn * S2 + 3 * SW * SW) -
                      b2 * ((nn * nn - nn) * S1 - 2 * nn * S2 + 6 * SW * SW)) /
                         ((nn - 1) * (nn - 2) * (nn - 3) * SW * SW) -
                     res.expected * res.expected;
        if (var > 0) {
            res.z = (res.I - res.expected) / std::sqrt(var);
            res.p_value = 2.0 * (1.0 - normal_cdf(std::abs(res.z)));
            res.significant = res.p_value < alpha;
        }
    }
    return res;
}

struct AcfResult {
    std::vector<double> acf;  // indices 0..max_lag
    double bound = 0.0;       // +- z_{alpha/2} / sqrt(n)
};

inline AcfResult acf(const std::vector<double>& series, int max_lag, double alpha = 0.01) {
    const int n = static_cast<int>(series.size());
    if (n <= max_lag) throw std::invalid_argument("acf: series shorter than max_lag");
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= n;
    double c0 = 0.0;
    for (double v : series) c0 += (v - mean) * (v - mean);
    c0 /= n;
    if (c0 == 0.0) throw std::runtime_error("acf: constant series");

    AcfResult res;
    for (int k = 0; k <= max_lag; ++k) {
        double ck = 0.0;
        for (int t = 0; t + k < n; ++t)
            ck += (series[static_cast<std::size_t>(t)] - mean) *
                  (series[static_cast<std::size_t>(t + k)] - mean);
        ck /= n;
        res.acf.push_back(ck / c0);
    }
    res.bound = normal_quantile(1.0 - alpha / 2.0) / std::sqrt(static_cast<double>(n));
    return res;
}

struct MetricsReport {
    double MAE = 0.0;
    double MAPE = 0.0;  // percent
    double RMSE = 0.0;
    double VAE = 0.0;
    double R2 = 0.0;
    int mape_skipped = 0;  // rows with zero truth, excluded from MAPE only
};

inline MetricsReport metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
    const int n = static_cast<int>(y.size());
    if (n == 0 || yhat.size() != y.size()) throw std::invalid_argument("metrics: bad input sizes");
    MetricsReport r;
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= n;
    double sse = 0.0, sst = 0.0, mape_sum = 0.0;
    int mape_n = 0;
    std::vector<double> abs_err(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double e = yhat[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)];
        abs_err[static_cast<std::size_t>(i)] = std::abs(e);
        r.MAE += std::abs(e);
        sse += e * e;
        sst += (y[static_cast<std::size_t>(i)] - ybar) * (y[static_cast<std::size_t>(i)] - ybar);
        if (y[static_cast<std::size_t>(i)] != 0.0) {
            mape_sum += std::abs(e / y[static_cast<std::size_t>(i)]);
            ++mape_n;
        } else {
            ++r.mape_skipped;
        }
    }
    r.MAE /= n;
    r.RMSE = std::sqrt(sse / n);
    r.MAPE = mape_n > 0 ? 100.0 * mape_sum / mape_n : 0.0;
    for (double a : abs_err) r.VAE += (a - r.MAE) * (a - r.MAE);
    r.VAE /= n;
    r.R2 = sst > 0 ? 1.0 - sse / sst : 0.0;
    return r;
}

struct SliceMoran {
    int time_index = 0;
    bool ok = false;
    std::string note;
    MoranResult result;
};

struct LocationAcf {
    std::string location_id;
    bool ok = false;
    std::string note;
    AcfResult result;
};

// Per-time-slice Moran's I on per-location cell summaries.  `values` is one
// number per observation (responses or residuals); replicated observations in
// a cell are reduced to their mean (or median when use_median is set), and
// locations without data in a slice are dropped.
inline std::vector<SliceMoran> per_time_moran(const Dataset& ds, const std::vector<double>& values,
                                              const Matrix& D, double alpha = 0.01,
                                              bool use_median = false) {
    if (values.size() != ds.observations.size())
        throw std::invalid_argument("per_time_moran: one value per observation required");
    std::vector<SliceMoran> out;
    for (int t = 0; t < ds.T; ++t) {
        std::vector<std::vector<double>> per_loc(static_cast<std::size_t>(ds.S()));
        for (std::size_t i = 0; i < ds.observations.size(); ++i) {
            const auto& obs = ds.observations[i];
            if (obs.time_index != t) continue;
            per_loc[static_cast<std::size_t>(obs.location_index)].push_back(values[i]);
        }
        std::vector<int> present;
        std::vector<double> z;
        for (int i = 0; i < ds.S(); ++i) {
            auto& cell = per_loc[static_cast<std::size_t>(i)];
            if (cell.empty()) continue;
            present.push_back(i);
            if (use_median) {
                std::sort(cell.begin(), cell.end());
                std::size_t mid = cell.size() / 2;
                z.push_back(cell.size() % 2 ? cell[mid] : 0.5 * (cell[mid - 1] + cell[mid]));
            } else {
                double s = 0.0;
                for (double v : cell) s += v;
                z.push_back(s / static_cast<double>(cell.size()));
            }
        }
        SliceMoran slice;
        slice.time_index = t;
        if (present.size() < 4) {
            slice.note = "fewer than 4 locations with data";
        } else {
            Matrix Dsub(present.size(), present.size());
            for (std::size_t i = 0; i < present.size(); ++i)
                for (std::size_t j = 0; j < present.size(); ++j)
                    Dsub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        D(present[i], present[j]);
            try {
                slice.result = morans_i(z, Dsub, alpha);
                slice.ok = true;
            } catch (const std::exception& e) {
                slice.note = e.what();
            }
        }
        out.push_back(std::move(slice));
    }
    return out;
}

// Per-location ACF on time-averaged values; locations with empty cells are
// skipped (unequal spacing would bias the estimate).
inline std::vector<LocationAcf> per_location_acf(const Dataset& ds,
                                                 const std::vector<double>& values, int max_lag,
                                                 double alpha = 0.01) {
    if (values.size() != ds.observations.size())
        throw std::invalid_argument("per_location_acf: one value per observation required");
    std::vector<std::vector<double>> sum(static_cast<std::size_t>(ds.S()),
                                         std::vector<double>(static_cast<std::size_t>(ds.T), 0.0));
    std::vector<std::vector<int>> count(static_cast<std::size_t>(ds.S()),
                                        std::vector<int>(static_cast<std::size_t>(ds.T), 0));
    for (std::size_t i = 0; i < ds.observations.size(); ++i) {
        const auto& obs = ds.observations[i];
        sum[static_cast<std::size_t>(obs.location_index)][static_cast<std::size_t>(obs.time_index)] +=
            values[i];
        ++count[static_cast<std::size_t>(obs.location_index)][static_cast<std::size_t>(obs.time_index)];
    }
    std::vector<LocationAcf> out;
    for (int l = 0; l < ds.S(); ++l) {
        LocationAcf la;
        la.location_id = ds.locations[static_cast<std::size_t>(l)].id;
        bool complete = true;
        std::vector<double> series;
        for (int t = 0; t < ds.T; ++t) {
            if (count[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)] == 0) {
                complete = false;
                break;
            }
            series.push_back(sum[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)] /
                             count[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)]);
        }
        if (!complete) {
            la.note = "missing cells";
        } else if (static_cast<int>(series.size()) <= max_lag) {
            la.note = "series shorter than max_lag";
        } else {
            try {
                la.result = acf(series, max_lag, alpha);
                la.ok = true;
            } catch (const std::exception& e) {
                la.note = e.what();
            }
        }
        out.push_back(std::move(la));
    }
    return out;
}

// Residual per observation: y - x'beta - v_hat(cell), with v_global in the
// full (location, time) layout.
inline std::vector<double> residuals(const Dataset& ds, const Vector& beta,
                                     const Vector& v_global) {
    if (beta.size() != ds.m() + 1) throw std::invalid_argument("residuals: beta length mismatch");
    if (v_global.size() != static_cast<Eigen::Index>(ds.S()) * ds.T)
        throw std::invalid_argument("residuals: v length mismatch");
    std::vector<double> out;
    for (const auto& obs : ds.observations) {
        double fit = beta(0);
        for (std::size_t j = 0; j < obs.covariates.size(); ++j)
            fit += beta(static_cast<Eigen::Index>(j) + 1) * obs.covariates[j];
        fit += v_global(static_cast<Eigen::Index>(obs.location_index) * ds.T + obs.time_index);
        out.push_back(obs.response - fit);
    }
    return out;
}

}  // namespace stbd
