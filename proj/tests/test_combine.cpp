#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "stbd/combine.hpp"
#include "stbd/io.hpp"

using namespace stbd;

namespace {
SubsetFit gaussian_fit(int L, const Vector& mu, const Matrix& cov, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    const int d = static_cast<int>(mu.size());
    Matrix Lc = chol_psd(cov).L;
    SubsetFit fit;
    fit.chain.draws.resize(L, d);
    for (int i = 0; i < L; ++i) {
        Vector z(d);
        for (int j = 0; j < d; ++j) z(j) = nd(gen);
        fit.chain.draws.row(i) = (mu + Lc * z).transpose();
    }
    for (int j = 0; j < d; ++j) fit.chain.names.push_back("p" + std::to_string(j));
    detail::chain_moments(fit);
    return fit;
}
}  // namespace

TEST_CASE("chain moments use the unbiased covariance") {
    SubsetFit fit;
    fit.chain.draws.resize(3, 2);
    fit.chain.draws << 1.0, 2.0, 3.0, 4.0, 5.0, 9.0;
    detail::chain_moments(fit);
    REQUIRE(fit.mu_hat(0) == Catch::Approx(3.0));
    REQUIRE(fit.mu_hat(1) == Catch::Approx(5.0));
    REQUIRE(fit.sigma_hat(0, 0) == Catch::Approx(4.0));           // var of {1,3,5}, n-1
    REQUIRE(fit.sigma_hat(1, 1) == Catch::Approx(13.0));          // var of {2,4,9}
    REQUIRE(fit.sigma_hat(0, 1) == Catch::Approx(7.0));           // cov
    REQUIRE(fit.sigma_hat(0, 1) == fit.sigma_hat(1, 0));
}

TEST_CASE("combining a single subset leaves its draws unchanged") {
    Vector mu(2);
    mu << 1.0, -2.0;
    Matrix cov(2, 2);
    cov << 2.0, 0.3, 0.3, 0.5;
    SubsetFit fit = gaussian_fit(500, mu, cov, 1);
    CombinedPosterior c = wasp_combine({fit});
    REQUIRE((c.wasp_draws - fit.chain.draws).norm() < 1e-8 * fit.chain.draws.norm());
    REQUIRE((c.overall_mean - fit.mu_hat).norm() < 1e-12);
}

TEST_CASE("combined Gaussians have the averaged mean and covariance") {
    Vector mu1(2), mu2(2);
    mu1 << 1.0, 0.0;
    mu2 << 3.0, 2.0;
    Matrix cov1(2, 2), cov2(2, 2);
    cov1 << 1.0, 0.2, 0.2, 0.8;
    cov2 << 0.6, -0.1, -0.1, 1.2;
    SubsetFit f1 = gaussian_fit(20000, mu1, cov1, 2);
    SubsetFit f2 = gaussian_fit(20000, mu2, cov2, 3);
    CombinedPosterior c = wasp_combine({f1, f2});
    REQUIRE(c.wasp_draws.rows() == 40000);

    Vector mu_bar = 0.5 * (f1.mu_hat + f2.mu_hat);
    Matrix cov_bar = 0.5 * (f1.sigma_hat + f2.sigma_hat);
    Vector pooled_mean = c.wasp_draws.colwise().mean();
    Matrix centered = c.wasp_draws.rowwise() - pooled_mean.transpose();
    Matrix pooled_cov = centered.transpose() * centered / (c.wasp_draws.rows() - 1.0);
    REQUIRE((pooled_mean - mu_bar).norm() < 1e-9);  // re-centering is exact in-sample
    REQUIRE((pooled_cov - cov_bar).norm() < 0.05);
    REQUIRE((c.overall_mean - mu_bar).norm() < 1e-12);
    REQUIRE((c.overall_cov - cov_bar).norm() < 1e-12);
}

TEST_CASE("singular subset covariances are handled by the ridge") {
    SubsetFit fit;
    fit.chain.draws.resize(100, 2);
    for (int i = 0; i < 100; ++i) {
        fit.chain.draws(i, 0) = i * 0.01;
        fit.chain.draws(i, 1) = 2.0 * i * 0.01;  // perfectly collinear
    }
    fit.chain.names = {"a", "b"};
    detail::chain_moments(fit);
    CombinedPosterior c = wasp_combine({fit});
    REQUIRE(c.wasp_draws.allFinite());

    double ridge = 0.0;
    Matrix r = detail::inv_sqrt_with_ridge(fit.sigma_hat, ridge);
    REQUIRE(ridge > 0.0);
    REQUIRE(r.allFinite());

    double no_ridge = 0.0;
    detail::inv_sqrt_with_ridge(Matrix::Identity(3, 3), no_ridge);
    REQUIRE(no_ridge == 0.0);
}

TEST_CASE("wasp quantiles interpolate the pooled sample") {
    SubsetFit fit;
    fit.chain.draws.resize(5, 1);
    fit.chain.draws << 1.0, 2.0, 3.0, 4.0, 5.0;
    fit.chain.names = {"x"};
    detail::chain_moments(fit);
    CombinedPosterior c = wasp_combine({fit});
    REQUIRE(wasp_quantile(c, 0.5)(0) == Catch::Approx(3.0));
    REQUIRE(wasp_quantile(c, 0.25)(0) == Catch::Approx(2.0));
    REQUIRE(wasp_quantile(c, 0.1)(0) == Catch::Approx(1.4));
    REQUIRE_THROWS(wasp_quantile(c, 0.0));
    REQUIRE_THROWS(wasp_quantile(c, 1.0));

    auto rows = summarize(c);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].name == "x");
    REQUIRE(rows[0].mean == Catch::Approx(3.0));
    REQUIRE(rows[0].q025 < rows[0].q975);
}

TEST_CASE("dimension mismatches and empty input are rejected") {
    REQUIRE_THROWS(wasp_combine({}));
    SubsetFit a = gaussian_fit(50, Vector::Zero(2), Matrix::Identity(2, 2), 4);
    SubsetFit b = gaussian_fit(50, Vector::Zero(3), Matrix::Identity(3, 3), 5);
    REQUIRE_THROWS(wasp_combine({a, b}));
}

TEST_CASE("stacked latent estimates land in the global layout") {
    const int S = 4, T = 2;
    Partition part;
    part.assignments = {{2, 0}, {3, 1}};
    std::vector<SubsetFit> fits(2);
    for (int q = 0; q < 2; ++q) {
        fits[static_cast<std::size_t>(q)].subset_index = q;
        fits[static_cast<std::size_t>(q)].chain.v_mean = Vector(4);
    }
    fits[0].chain.v_mean << 20.0, 20.1, 0.0, 0.1;   // locations 2 then 0
    fits[1].chain.v_mean << 30.0, 30.1, 10.0, 10.1; // locations 3 then 1
    Vector v = stack_v(fits, part, S, T);
    Vector expect(8);
    expect << 0.0, 0.1, 10.0, 10.1, 20.0, 20.1, 30.0, 30.1;
    REQUIRE((v - expect).norm() == 0.0);

    Partition incomplete;
    incomplete.assignments = {{2, 0}, {3}};
    std::vector<SubsetFit> partial(2);
    partial[0].subset_index = 0;
    partial[0].chain.v_mean = fits[0].chain.v_mean;
    partial[1].subset_index = 1;
    partial[1].chain.v_mean = Vector::Zero(2);
    REQUIRE_THROWS(stack_v(partial, incomplete, S, T));
}

TEST_CASE("subset chains are identical for any worker count") {
    TrueParams params;
    params.beta = Vector(3);
    params.beta << 9.675, 0.982, -0.646;
    auto [ds, truth] = simulate(12, 4, 2.0, params, CovariateSpec{}, 31);
    Partition part = partition_locations(ds, 3, 31);
    MCMCConfig cfg;
    cfg.iterations = 120;
    cfg.burn_in = 40;
    cfg.thin = 2;
    cfg.seed = 31;
    auto phi_s = std::vector<double>{1.0, 2.0};
    auto phi_t = std::vector<double>{0.4, 0.8};

    DnCFit serial = fit_dnc(ds, part, Priors{}, cfg, phi_s, phi_t, 1);
    DnCFit parallel = fit_dnc(ds, part, Priors{}, cfg, phi_s, phi_t, 3);
    REQUIRE(serial.fits.size() == 3);
    for (std::size_t q = 0; q < 3; ++q) {
        REQUIRE((serial.fits[q].chain.draws - parallel.fits[q].chain.draws).norm() == 0.0);
        REQUIRE((serial.fits[q].chain.v_mean - parallel.fits[q].chain.v_mean).norm() == 0.0);
        REQUIRE(serial.fits[q].p ==
                Catch::Approx(static_cast<double>(ds.N()) / serial.fits[q].design.N_q()));
    }
}

TEST_CASE("fit artifacts round trip through the filesystem") {
    TrueParams params;
    params.beta = Vector(3);
    params.beta << 9.675, 0.982, -0.646;
    auto [ds, truth] = simulate(8, 3, 2.0, params, CovariateSpec{}, 32);
    Partition part = partition_locations(ds, 2, 32);
    MCMCConfig cfg;
    cfg.iterations = 80;
    cfg.burn_in = 20;
    cfg.thin = 2;
    cfg.seed = 32;
    auto phi_s = std::vector<double>{1.0, 2.0};
    auto phi_t = std::vector<double>{0.4, 0.8};
    DnCFit fit = fit_dnc(ds, part, Priors{}, cfg, phi_s, phi_t, 1);

    std::string dir = "/tmp/stbd_test_fitdir";
    std::filesystem::create_directories(dir);
    save_partition(fit.partition, ds, dir + "/partition.csv");
    for (const auto& f : fit.fits) {
        save_chain(f.chain, dir + "/chain_" + std::to_string(f.subset_index) + ".csv");
        save_v_mean(f.chain, f.design, ds,
                    dir + "/v_mean_" + std::to_string(f.subset_index) + ".csv");
    }
    save_keyvalue({{"phi_s_grid", "1,2"}, {"phi_t_grid", "0.4,0.8"}}, dir + "/fit_meta.txt");

    DnCFit loaded = load_fit(dir, ds);
    REQUIRE(loaded.fits.size() == fit.fits.size());
    for (std::size_t q = 0; q < fit.fits.size(); ++q) {
        REQUIRE((loaded.fits[q].chain.draws - fit.fits[q].chain.draws).norm() <
                1e-9 * (1.0 + fit.fits[q].chain.draws.norm()));
        REQUIRE((loaded.fits[q].chain.v_mean - fit.fits[q].chain.v_mean).norm() < 1e-7);
        REQUIRE(loaded.fits[q].p == Catch::Approx(fit.fits[q].p));
        REQUIRE(loaded.fits[q].design.subset_locs == fit.fits[q].design.subset_locs);
    }
    std::filesystem::remove_all(dir);
}
