#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stbd/covariance.hpp"
#include "stbd/dataset.hpp"
#include "stbd/rng.hpp"

namespace stbd {

struct Priors {
    double c = 1e4;      // beta prior variance
    double a = 2.0;      // IG shape
    double lambda = 1.0; // IG scale
};

enum class ModelVariant { hedonic, temporal, spatial, spatiotemporal };

inline ModelVariant parse_variant(const std::string& s) {
    if (s == "hedonic") return ModelVariant::hedonic;
    if (s == "temporal") return ModelVariant::temporal;
    if (s == "spatial") return ModelVariant::spatial;
    if (s == "spatiotemporal") return ModelVariant::spatiotemporal;
    throw std::invalid_argument("unknown model variant: " + s);
}

struct MCMCConfig {
    int iterations = 22000;
    int burn_in = 2000;
    int thin = 10;
    std::uint64_t seed = 0;
    ModelVariant variant = ModelVariant::spatiotemporal;
    // reproduce the printed phi conditional (no 1/2, no sigma_v^2 division)
    bool phi_exponent_literal = false;
    bool store_v_draws = false;

    void validate() const {
        if (burn_in >= iterations) throw std::invalid_argument("burn_in must be < iterations");
        if (thin < 1) throw std::invalid_argument("thin must be >= 1");
    }
};

struct SamplerState {
    Vector beta;
    double sigma_eps2 = 1.0;
    double sigma_v2 = 1.0;
    int phi_s_idx = 0;
    int phi_t_idx = 0;
    Vector V;    // length G_(q), location-major
    double p = 1.0;
};

struct GewekeReport {
    std::vector<std::string> names;
    std::vector<double> z;
    bool converged = true;
};

struct Chain {
    Matrix draws;  // L x d
    std::vector<std::string> names;
    Vector v_mean;         // posterior mean of V over retained draws
    Vector v_second;       // running mean of V^2, for marginal variances
    Matrix v_draws;        // retained V draws when requested, L x G_(q)
    GewekeReport geweke;
    int burn_in = 0;
    int thin = 1;
    std::uint64_t seed = 0;

    int L() const { return static_cast<int>(draws.rows()); }
};

// One subset's model context: design, precomputed covariance tables, the
// likelihood power, and cached design cross-products.
struct SubsetModel {
    const DesignBundle* design = nullptr;
    const GridTables* tables = nullptr;
    int subset_index = 0;
    Priors priors;
    double p = 1.0;
    ModelVariant variant = ModelVariant::spatiotemporal;
    bool phi_exponent_literal = false;

    Matrix XtX;
    std::vector<int> cell_row_start;  // rows of a cell are contiguous

    bool use_spatial() const {
        return variant == ModelVariant::spatial || variant == ModelVariant::spatiotemporal;
    }
    bool use_temporal() const {
        return variant == ModelVariant::temporal || variant == ModelVariant::spatiotemporal;
    }
    bool has_latent() const { return variant != ModelVariant::hedonic; }

    const SpatialSubsetTable& spatial_at(int phi_s_idx) const {
        return tables->spatial[static_cast<std::size_t>(phi_s_idx)]
            .subsets[static_cast<std::size_t>(subset_index)];
    }
    const TemporalTable& temporal_at(int phi_t_idx) const {
        return tables->temporal[static_cast<std::size_t>(phi_t_idx)];
    }
};

inline SubsetModel make_subset_model(const DesignBundle& design, const GridTables& tables,
                                     int subset_index, const Priors& priors, double p,
                                     ModelVariant variant = ModelVariant::spatiotemporal,
                                     bool phi_exponent_literal = false) {
    if (p < 1.0) throw std::invalid_argument("make_subset_model: power must be >= 1");
    SubsetModel m;
    m.design = &design;
    m.tables = &tables;
    m.subset_index = subset_index;
    m.priors = priors;
    m.p = p;
    m.variant = variant;
    m.phi_exponent_literal = phi_exponent_literal;
    m.XtX = design.X.transpose() * design.X;
    m.cell_row_start.assign(static_cast<std::size_t>(design.G_q()) + 1, 0);
    for (int i = 0; i < design.N_q(); ++i)
        ++m.cell_row_start[static_cast<std::size_t>(design.cell_index[static_cast<std::size_t>(i)]) + 1];
    for (std::size_t c = 1; c < m.cell_row_start.size(); ++c)
        m.cell_row_start[c] += m.cell_row_start[c - 1];
    return m;
}

// Quadratic form V' (P_s (x) P_t) V where either factor may be the identity.
inline double latent_quadform(const SubsetModel& m, const SamplerState& st) {
    const int mq = m.design->m_q();
    const int T = m.design->T;
    const Matrix* Ps = m.use_spatial() ? &m.spatial_at(st.phi_s_idx).tilde_inv : nullptr;
    const Matrix* Pt = m.use_temporal() ? &m.temporal_at(st.phi_t_idx).sigma_inv : nullptr;
    Eigen::Map<const Matrix> Vm(st.V.data(), T, mq);
    Matrix R;
    if (Ps && Pt)
        R = (*Pt) * Vm * Ps->transpose();
    else if (Ps)
        R = Vm * Ps->transpose();
    else if (Pt)
        R = (*Pt) * Vm;
    else
        R = Vm;
    return (Vm.array() * R.array()).sum();
}

namespace detail {
// draw from N(Prec^{-1} eta, Prec^{-1})
inline Vector draw_from_precision(const Matrix& prec, const Vector& eta, Rng& rng) {
    CholResult c = chol_psd(prec);
    Vector mean = c.L.transpose().triangularView<Eigen::Upper>().solve(
        Vector(c.L.triangularView<Eigen::Lower>().solve(eta)));
    Vector z(eta.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return mean + c.L.transpose().triangularView<Eigen::Upper>().solve(z);
}

inline Vector bv_vector(const SubsetModel& m, const Vector& V) {
    const auto& cells = m.design->cell_index;
    Vector bv(m.design->N_q());
    for (int i = 0; i < m.design->N_q(); ++i) bv(i) = V(cells[static_cast<std::size_t>(i)]);
    return bv;
}
}  // namespace detail

struct GaussianParams {
    Vector mean;
    Matrix precision;
};

inline GaussianParams beta_conditional(const SubsetModel& m, const SamplerState& st) {
    const auto& d = *m.design;
    Matrix prec = (m.p / st.sigma_eps2) * m.XtX;
    prec.diagonal().array() += 1.0 / m.priors.c;
    Vector resid = d.Y - detail::bv_vector(m, st.V);
    Vector eta = (m.p / st.sigma_eps2) * (d.X.transpose() * resid);
    CholResult c = chol_psd(prec);
    Vector mean = c.L.transpose().triangularView<Eigen::Upper>().solve(
        Vector(c.L.triangularView<Eigen::Lower>().solve(eta)));
    return {mean, prec};
}

inline Vector gibbs_step_beta(const SubsetModel& m, const SamplerState& st, Rng& rng) {
    const auto& d = *m.design;
    Matrix prec = (m.p / st.sigma_eps2) * m.XtX;
    prec.diagonal().array() += 1.0 / m.priors.c;
    Vector resid = d.Y - detail::bv_vector(m, st.V);
    Vector eta = (m.p / st.sigma_eps2) * (d.X.transpose() * resid);
    return detail::draw_from_precision(prec, eta, rng);
}

struct IGParams {
    double shape;
    double scale;
};

inline IGParams sigma_eps_conditional(const SubsetModel& m, const SamplerState& st) {
    const auto& d = *m.design;
    Vector r = d.Y - d.X * st.beta - detail::bv_vector(m, st.V);
    return {m.priors.a + m.p * d.N_q() / 2.0, m.p * r.squaredNorm() / 2.0 + m.priors.lambda};
}

inline double gibbs_step_sigma_eps(const SubsetModel& m, const SamplerState& st, Rng& rng) {
    IGParams ig = sigma_eps_conditional(m, st);
    return rng.inverse_gamma(ig.shape, ig.scale);
}

inline IGParams sigma_v_conditional(const SubsetModel& m, const SamplerState& st) {
    return {m.priors.a + m.p * m.design->G_q() / 2.0,
            m.p * latent_quadform(m, st) / 2.0 + m.priors.lambda};
}

inline double gibbs_step_sigma_v(const SubsetModel& m, const SamplerState& st, Rng& rng) {
    IGParams ig = sigma_v_conditional(m, st);
    return rng.inverse_gamma(ig.shape, ig.scale);
}

// Unnormalized log posterior over the active decay grid.  Row-major over
// (phi_s index, phi_t index); inactive dimensions have a single entry.
inline Matrix phi_log_posterior(const SubsetModel& m, const SamplerState& st) {
    const int ns = m.use_spatial() ? static_cast<int>(m.tables->phi_s_grid.size()) : 1;
    const int nt = m.use_temporal() ? static_cast<int>(m.tables->phi_t_grid.size()) : 1;
    const int T = m.design->T;
    const int mq = m.design->m_q();
    Matrix lp(ns, nt);
    SamplerState probe = st;
    for (int is = 0; is < ns; ++is) {
        for (int it = 0; it < nt; ++it) {
            probe.phi_s_idx = m.use_spatial() ? is : st.phi_s_idx;
            probe.phi_t_idx = m.use_temporal() ? it : st.phi_t_idx;
            double q = latent_quadform(m, probe);
            double v = 0.0;
            if (m.use_spatial()) v -= m.p * T / 2.0 * m.spatial_at(is).logdet_sigma;
            if (m.use_temporal()) v -= m.p * mq / 2.0 * m.temporal_at(it).logdet_sigma;
            if (m.phi_exponent_literal)
                v -= m.p * q / st.sigma_v2;
            else
                v -= m.p * q / (2.0 * st.sigma_v2);
            lp(is, it) = v;
        }
    }
    return lp;
}

inline std::pair<int, int> gibbs_step_phi(const SubsetModel& m, const SamplerState& st, Rng& rng) {
    Matrix lp = phi_log_posterior(m, st);
    double mx = lp.maxCoeff();
    if (!std::isfinite(mx)) throw std::runtime_error("gibbs_step_phi: all grid points -inf");
    Matrix w = (lp.array() - mx).exp();
    double total = w.sum();
    double u = rng.uniform() * total;
    int is = static_cast<int>(lp.rows()) - 1, it = static_cast<int>(lp.cols()) - 1;
    double acc = 0.0;
    for (int i = 0; i < lp.rows(); ++i)
        for (int j = 0; j < lp.cols(); ++j) {
            acc += w(i, j);
            if (acc >= u) return {m.use_spatial() ? i : st.phi_s_idx,
                                  m.use_temporal() ? j : st.phi_t_idx};
        }
    return {m.use_spatial() ? is : st.phi_s_idx, m.use_temporal() ? it : st.phi_t_idx};
}

// One location's T-block of V given all other locations' current blocks.
// cell_resid holds per-cell sums of (Y - X beta) over replicates.
inline Vector gibbs_step_v_location(const SubsetModel& m, const SamplerState& st, int loc,
                                    const Vector& cell_resid, Rng& rng) {
    const int T = m.design->T;
    const int mq = m.design->m_q();
    const Matrix* Ps = m.use_spatial() ? &m.spatial_at(st.phi_s_idx).tilde_inv : nullptr;
    const Matrix* Pt = m.use_temporal() ? &m.temporal_at(st.phi_t_idx).sigma_inv : nullptr;

    const double p_ll = Ps ? (*Ps)(loc, loc) : 1.0;
    // cross term of the GP prior: sum_{j != loc} P_s(loc,j) V_j
    Vector cross = Vector::Zero(T);
    if (Ps) {
        Eigen::Map<const Matrix> Vm(st.V.data(), T, mq);
        for (int j = 0; j < mq; ++j)
            if (j != loc && (*Ps)(loc, j) != 0.0) cross += (*Ps)(loc, j) * Vm.col(j);
    }

    Matrix prec = Pt ? Matrix((p_ll / st.sigma_v2) * (*Pt))
                     : Matrix((p_ll / st.sigma_v2) * Matrix::Identity(T, T));
    Vector eta = Pt ? Vector(-(*Pt) * cross / st.sigma_v2) : Vector(-cross / st.sigma_v2);
    for (int t = 0; t < T; ++t) {
        int cell = loc * T + t;
        int k = m.design->K_diag[static_cast<std::size_t>(cell)];
        prec(t, t) += m.p * k / st.sigma_eps2;
        eta(t) += m.p * cell_resid(cell) / st.sigma_eps2;
    }
    return detail::draw_from_precision(prec, eta, rng);
}

inline Vector cell_residual_sums(const SubsetModel& m, const Vector& beta) {
    const auto& d = *m.design;
    Vector resid = d.Y - d.X * beta;
    Vector sums = Vector::Zero(d.G_q());
    for (int i = 0; i < d.N_q(); ++i) sums(d.cell_index[static_cast<std::size_t>(i)]) += resid(i);
    return sums;
}

// Geweke convergence z-score comparing the first frac_a to the last frac_b of
// the series; long-run variances via non-overlapping batch means.
inline double geweke_z(const std::vector<double>& series, double frac_a = 0.1,
                       double frac_b = 0.5) {
    const int n = static_cast<int>(series.size());
    if (n < 50) throw std::invalid_argument("geweke_z: series too short");
    auto segment_stats = [&](int begin, int len) {
        double mean = 0.0;
        for (int i = 0; i < len; ++i) mean += series[static_cast<std::size_t>(begin + i)];
        mean /= len;
        int nb = static_cast<int>(std::floor(std::sqrt(static_cast<double>(len))));
        int bs = len / nb;
        std::vector<double> bm(static_cast<std::size_t>(nb), 0.0);
        for (int b = 0; b < nb; ++b) {
            for (int i = 0; i < bs; ++i)
                bm[static_cast<std::size_t>(b)] += series[static_cast<std::size_t>(begin + b * bs + i)];
            bm[static_cast<std::size_t>(b)] /= bs;
        }
        double bmean = 0.0;
        for (double v : bm) bmean += v;
        bmean /= nb;
        double bvar = 0.0;
        for (double v : bm) bvar += (v - bmean) * (v - bmean);
        bvar /= (nb - 1);
        return std::pair<double, double>(mean, bs * bvar);  // (mean, long-run variance)
    };
    int na = static_cast<int>(n * frac_a);
    int nb = static_cast<int>(n * frac_b);
    auto [ma, sa2] = segment_stats(0, na);
    auto [mb, sb2] = segment_stats(n - nb, nb);
    double denom = sa2 / na + sb2 / nb;
    if (denom <= 0.0) throw std::runtime_error("geweke_z: degenerate (zero-variance) series");
    return (ma - mb) / std::sqrt(denom);
}

inline std::vector<std::string> chain_column_names(int n_beta) {
    std::vector<std::string> names;
    for (int j = 0; j < n_beta; ++j) names.push_back("beta_" + std::to_string(j));
    names.push_back("sigma_eps2");
    names.push_back("sigma_v2");
    names.push_back("phi_s");
    names.push_back("phi_t");
    return names;
}

inline Chain run_subset_chain(const SubsetModel& m, const MCMCConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto& d = *m.design;
    const int G = d.G_q();
    const int nb = static_cast<int>(d.X.cols());

    SamplerState st;
    st.p = m.p;
    st.beta = d.X.colPivHouseholderQr().solve(d.Y);
    st.sigma_eps2 = 1.0;
    st.sigma_v2 = 1.0;
    st.phi_s_idx = static_cast<int>(m.tables->phi_s_grid.size()) / 2;
    st.phi_t_idx = static_cast<int>(m.tables->phi_t_grid.size()) / 2;
    st.V = Vector::Zero(G);

    const int L = (cfg.iterations - cfg.burn_in) / cfg.thin;
    if (L < 1) throw std::invalid_argument("run_subset_chain: no retained draws");
    Chain chain;
    chain.names = chain_column_names(nb);
    chain.draws.resize(L, nb + 4);
    chain.v_mean = Vector::Zero(G);
    chain.v_second = Vector::Zero(G);
    if (cfg.store_v_draws) chain.v_draws.resize(L, G);
    chain.burn_in = cfg.burn_in;
    chain.thin = cfg.thin;
    chain.seed = cfg.seed;

    int kept = 0;
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        st.beta = gibbs_step_beta(m, st, rng);
        st.sigma_eps2 = gibbs_step_sigma_eps(m, st, rng);
        if (m.has_latent()) {
            Vector cell_resid = cell_residual_sums(m, st.beta);
            for (int loc = 0; loc < d.m_q(); ++loc)
                st.V.segment(static_cast<Eigen::Index>(loc) * d.T, d.T) =
                    gibbs_step_v_location(m, st, loc, cell_resid, rng);
            st.sigma_v2 = gibbs_step_sigma_v(m, st, rng);
            auto [is, it] = gibbs_step_phi(m, st, rng);
            st.phi_s_idx = is;
            st.phi_t_idx = it;
        }
        if (iter >= cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0 && kept < L) {
            chain.draws.block(kept, 0, 1, nb) = st.beta.transpose();
            chain.draws(kept, nb) = st.sigma_eps2;
            chain.draws(kept, nb + 1) = st.sigma_v2;
            chain.draws(kept, nb + 2) = m.tables->phi_s_grid[static_cast<std::size_t>(st.phi_s_idx)];
            chain.draws(kept, nb + 3) = m.tables->phi_t_grid[static_cast<std::size_t>(st.phi_t_idx)];
            chain.v_mean += st.V;
            chain.v_second += st.V.cwiseProduct(st.V);
            if (cfg.store_v_draws) chain.v_draws.row(kept) = st.V.transpose();
            ++kept;
        }
    }
    chain.v_mean /= kept;
    chain.v_second /= kept;

    chain.geweke.names = chain.names;
    chain.geweke.converged = true;
    for (int col = 0; col < chain.draws.cols(); ++col) {
        std::vector<double> series(static_cast<std::size_t>(L));
        for (int i = 0; i < L; ++i) series[static_cast<std::size_t>(i)] = chain.draws(i, col);
        double z;
        try {
            z = geweke_z(series);
        } catch (const std::exception&) {
            z = 0.0;  // constant column (e.g. a decay parameter stuck on one grid point)
        }
        chain.geweke.z.push_back(z);
        if (std::abs(z) > 1.96) chain.geweke.converged = false;
    }
    return chain;
}

}  // namespace stbd
