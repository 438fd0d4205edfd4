#pragma once

#include <algorithm>
#include <atomic>
#include <limits>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "stbd/sampler.hpp"
#include "stbd/simulate.hpp"

namespace stbd {

struct SubsetFit {
    int subset_index = 0;
    Chain chain;
    double p = 1.0;
    Vector mu_hat;     // sample mean of the chain draws
    Matrix sigma_hat;  // sample covariance, L-1 denominator
    DesignBundle design;
};

struct CombinedPosterior {
    Matrix wasp_draws;  // QL x d pooled transformed draws
    Vector overall_mean;
    Matrix overall_cov;
    Vector v_estimate;  // length G, global (location, time) layout
    std::vector<std::string> names;
};

struct DnCFit {
    std::vector<SubsetFit> fits;
    GridTables tables;
    Partition partition;
};

namespace detail {
inline void chain_moments(SubsetFit& fit) {
    const Matrix& d = fit.chain.draws;
    const int L = static_cast<int>(d.rows());
    fit.mu_hat = d.colwise().mean();
    Matrix centered = d.rowwise() - fit.mu_hat.transpose();
    fit.sigma_hat = L > 1 ? Matrix((centered.transpose() * centered) / (L - 1.0))
                          : Matrix(Matrix::Zero(d.cols(), d.cols()));
}
}  // namespace detail

// Runs every subset chain (optionally across threads) with powers
// p_q = N / N_(q) and independent per-subset RNG streams.
inline DnCFit fit_dnc(const Dataset& ds, const Partition& part, const Priors& priors,
                      const MCMCConfig& cfg,
                      const std::vector<double>& phi_s_grid = default_phi_s_grid(),
                      const std::vector<double>& phi_t_grid = default_phi_t_grid(),
                      int workers = 1) {
    cfg.validate();
    DnCFit out;
    out.partition = part;
    out.tables = build_grid_tables(ds, part, phi_s_grid, phi_t_grid);
    const int Q = part.Q();
    out.fits.resize(static_cast<std::size_t>(Q));

    std::vector<std::string> errors(static_cast<std::size_t>(Q));
    std::atomic<int> next(0);
    auto work = [&]() {
        for (;;) {
            int q = next.fetch_add(1);
            if (q >= Q) return;
            try {
                SubsetFit fit;
                fit.subset_index = q;
                fit.design = build_design(ds, part.assignments[static_cast<std::size_t>(q)]);
                fit.p = static_cast<double>(ds.N()) / fit.design.N_q();
                SubsetModel model = make_subset_model(fit.design, out.tables, q, priors, fit.p,
                                                      cfg.variant, cfg.phi_exponent_literal);
                Rng rng(subset_seed(cfg.seed, static_cast<std::uint64_t>(q)));
                fit.chain = run_subset_chain(model, cfg, rng);
                detail::chain_moments(fit);
                out.fits[static_cast<std::size_t>(q)] = std::move(fit);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(q)] = e.what();
            }
        }
    };
    int nthreads = std::max(1, std::min(workers, Q));
    if (nthreads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (int q = 0; q < Q; ++q)
        if (!errors[static_cast<std::size_t>(q)].empty())
            throw std::runtime_error("subset " + std::to_string(q) + " failed: " +
                                     errors[static_cast<std::size_t>(q)]);
    return out;
}

namespace detail {
// S^{-1/2} with a trace-scaled ridge for singular covariance estimates.
inline Matrix inv_sqrt_with_ridge(const Matrix& S, double& ridge_used) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
    Vector ev = es.eigenvalues();
    double trace = std::max(ev.sum(), 0.0);
    double ridge = 0.0;
    if (ev.minCoeff() <= 1e-12 * std::max(trace, 1.0))
        ridge = 1e-10 * std::max(trace, 1.0) / static_cast<double>(S.rows());
    ridge_used = ridge;
    Vector inv_sqrt = ((ev.array() + ridge).max(ridge > 0 ? ridge : 1e-300)).rsqrt();
    return es.eigenvectors() * inv_sqrt.matrix().asDiagonal() * es.eigenvectors().transpose();
}
}  // namespace detail

// Affine WASP approximation: center/scale each subset's draws, re-center with
// the averaged mean and covariance, pool all QL transformed draws.
inline CombinedPosterior wasp_combine(const std::vector<SubsetFit>& fits) {
    if (fits.empty()) throw std::invalid_argument("wasp_combine: no fits");
    const int d = static_cast<int>(fits[0].mu_hat.size());
    const int Q = static_cast<int>(fits.size());
    for (const auto& f : fits)
        if (f.mu_hat.size() != d) throw std::invalid_argument("wasp_combine: dimension mismatch");

    Vector mu_bar = Vector::Zero(d);
    Matrix sigma_bar = Matrix::Zero(d, d);
    for (const auto& f : fits) {
        mu_bar += f.mu_hat;
        sigma_bar += f.sigma_hat;
    }
    mu_bar /= Q;
    sigma_bar /= Q;
    Matrix sigma_bar_sqrt = matrix_sqrt_psd(sigma_bar);

    int total = 0;
    for (const auto& f : fits) total += f.chain.L();
    CombinedPosterior out;
    out.names = fits[0].chain.names;
    out.overall_mean = mu_bar;
    out.overall_cov = sigma_bar;
    out.wasp_draws.resize(total, d);
    int row = 0;
    for (const auto& f : fits) {
        double ridge = 0.0;
        Matrix inv_sqrt = detail::inv_sqrt_with_ridge(f.sigma_hat, ridge);
        Matrix scale = sigma_bar_sqrt * inv_sqrt;
        Matrix centered = f.chain.draws.rowwise() - f.mu_hat.transpose();
        out.wasp_draws.block(row, 0, f.chain.L(), d) =
            (centered * scale.transpose()).rowwise() + mu_bar.transpose();
        row += f.chain.L();
    }
    return out;
}

// Empirical quantile of the pooled WASP draws, linear interpolation.
inline Vector wasp_quantile(const CombinedPosterior& combined, double gamma) {
    if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("wasp_quantile: gamma in (0,1)");
    const int n = static_cast<int>(combined.wasp_draws.rows());
    if (n == 0) throw std::invalid_argument("wasp_quantile: no draws");
    const int d = static_cast<int>(combined.wasp_draws.cols());
    Vector out(d);
    std::vector<double> col(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = combined.wasp_draws(i, j);
        std::sort(col.begin(), col.end());
        double h = gamma * (n - 1);
        int lo = static_cast<int>(std::floor(h));
        int hi = std::min(lo + 1, n - 1);
        double frac = h - lo;
        out(j) = (1.0 - frac) * col[static_cast<std::size_t>(lo)] +
                 frac * col[static_cast<std::size_t>(hi)];
    }
    return out;
}

// Per-subset V posterior means placed back into the global layout.
inline Vector stack_v(const std::vector<SubsetFit>& fits, const Partition& part, int S, int T) {
    Vector v = Vector::Constant(static_cast<Eigen::Index>(S) * T,
                                std::numeric_limits<double>::quiet_NaN());
    for (const auto& f : fits) {
        const auto& locs = part.assignments[static_cast<std::size_t>(f.subset_index)];
        for (std::size_t l = 0; l < locs.size(); ++l)
            v.segment(static_cast<Eigen::Index>(locs[l]) * T, T) =
                f.chain.v_mean.segment(static_cast<Eigen::Index>(l) * T, T);
    }
    if (!v.allFinite()) throw std::runtime_error("stack_v: partition does not cover all locations");
    return v;
}

struct SummaryRow {
    std::string name;
    double mean;
    double q025;
    double q975;
};

inline std::vector<SummaryRow> summarize(const CombinedPosterior& combined) {
    if (combined.wasp_draws.rows() == 0) throw std::invalid_argument("summarize: empty posterior");
    Vector mean = combined.wasp_draws.colwise().mean();
    Vector lo = wasp_quantile(combined, 0.025);
    Vector hi = wasp_quantile(combined, 0.975);
    std::vector<SummaryRow> rows;
    for (std::size_t j = 0; j < combined.names.size(); ++j)
        rows.push_back({combined.names[j], mean(static_cast<Eigen::Index>(j)),
                        lo(static_cast<Eigen::Index>(j)), hi(static_cast<Eigen::Index>(j))});
    return rows;
}

}  // namespace stbd
