// Command-line driver: simulate | fit | predict | diagnose | evaluate.
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "stbd/combine.hpp"
#include "stbd/diagnostics.hpp"
#include "stbd/io.hpp"
#include "stbd/predict.hpp"
#include "stbd/sampler.hpp"
#include "stbd/simulate.hpp"
#include "stbd/version.hpp"

namespace fs = std::filesystem;
using namespace stbd;

namespace {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream ss;
    ss.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? "," : "") << v[i];
    return ss.str();
}

void write_run_stamp(CLI::App* sub, const std::string& outdir) {
    fs::create_directories(outdir);
    std::ofstream out(outdir + "/config_echo.txt");
    out << "version " << kVersion << '\n';
    out << sub->config_to_str(true, false);
}

Dataset load_checked(const std::string& path) {
    try {
        return load_dataset(path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

void apply_log1p(Dataset& ds, const std::vector<std::string>& cols) {
    for (const auto& name : cols) {
        int idx = -1;
        for (std::size_t j = 0; j < ds.covariate_names.size(); ++j)
            if (ds.covariate_names[j] == name) idx = static_cast<int>(j);
        if (idx < 0) throw DataError("log1p: no covariate named " + name);
        for (auto& obs : ds.observations) {
            double v = obs.covariates[static_cast<std::size_t>(idx)];
            if (v <= -1.0) throw DataError("log1p: value <= -1 in column " + name);
            obs.covariates[static_cast<std::size_t>(idx)] = std::log1p(v);
        }
    }
}

struct ApeBrackets {
    int lt3 = 0, b3to5 = 0, b5to10 = 0, gt10 = 0;
};

ApeBrackets ape_brackets(const std::vector<double>& ape_percent) {
    ApeBrackets b;
    for (double a : ape_percent) {
        if (a < 3.0)
            ++b.lt3;
        else if (a < 5.0)
            ++b.b3to5;
        else if (a < 10.0)
            ++b.b5to10;
        else
            ++b.gt10;
    }
    return b;
}

void save_ape_brackets(const ApeBrackets& b, int total, const std::string& path) {
    csv::Writer w(path);
    w.row("ape_bracket,count,percent");
    auto pct = [&](int c) { return total > 0 ? 100.0 * c / total : 0.0; };
    w.row("<3%", b.lt3, pct(b.lt3));
    w.row("3-5%", b.b3to5, pct(b.b3to5));
    w.row("5-10%", b.b5to10, pct(b.b5to10));
    w.row(">10%", b.gt10, pct(b.gt10));
}

void save_metrics(const MetricsReport& m, const std::string& path) {
    save_keyvalue({{"MAE", std::to_string(m.MAE)},
                   {"MAPE_percent", std::to_string(m.MAPE)},
                   {"RMSE", std::to_string(m.RMSE)},
                   {"VAE", std::to_string(m.VAE)},
                   {"R2", std::to_string(m.R2)},
                   {"MAPE_rows_skipped_zero_truth", std::to_string(m.mape_skipped)}},
                  path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Divide-and-conquer Bayesian spatio-temporal GP regression"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value config file; CLI flags override");

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset from the model");
    struct {
        int S = 30, T = 24;
        double mean_replicates = 3.0;
        double sigma_eps2 = 0.043, sigma_v2 = 0.083, phi_s = 2.4, phi_t = 0.6;
        std::string beta = "9.675,0.982,-0.646";
        int n_extra = 0;
        bool no_trend = false;
        double lat_min = 51.49, lat_max = 51.53, lon_min = -0.15, lon_max = -0.09;
        std::uint64_t seed = 1;
        std::string out;
    } so;
    sim->add_option("--S", so.S, "number of locations");
    sim->add_option("--T", so.T, "number of time points");
    sim->add_option("--mean-replicates", so.mean_replicates, "Poisson mean per cell");
    sim->add_option("--sigma-eps2", so.sigma_eps2);
    sim->add_option("--sigma-v2", so.sigma_v2);
    sim->add_option("--phi-s", so.phi_s);
    sim->add_option("--phi-t", so.phi_t);
    sim->add_option("--beta", so.beta, "comma-separated true coefficients (intercept first)");
    sim->add_option("--n-extra-covariates", so.n_extra, "additional iid N(0,1) covariates");
    sim->add_flag("--no-trend", so.no_trend, "omit the time-trend covariates");
    sim->add_option("--lat-min", so.lat_min);
    sim->add_option("--lat-max", so.lat_max);
    sim->add_option("--lon-min", so.lon_min);
    sim->add_option("--lon-max", so.lon_max);
    sim->add_option("--seed", so.seed);
    sim->add_option("--out", so.out, "output directory")->required();

    // ---- fit ----
    auto* fit = app.add_subcommand("fit", "Run the divide-and-conquer fit");
    struct {
        std::string data;
        int Q = 1;
        std::uint64_t seed = 1;
        int iterations = 22000, burn_in = 2000, thin = 10;
        std::string variant = "spatiotemporal";
        double c = 1e4, a = 2.0, lambda = 1.0;
        std::string phi_s_grid, phi_t_grid, log1p_cols;
        int workers = 1;
        bool phi_literal = false;
        std::string out;
    } fo;
    fit->add_option("--data", fo.data, "training dataset CSV")->required();
    fit->add_option("--Q", fo.Q, "number of subsets");
    fit->add_option("--seed", fo.seed, "master seed");
    fit->add_option("--iterations", fo.iterations);
    fit->add_option("--burn-in", fo.burn_in);
    fit->add_option("--thin", fo.thin);
    fit->add_option("--variant", fo.variant, "hedonic|temporal|spatial|spatiotemporal");
    fit->add_option("--prior-c", fo.c, "beta prior variance");
    fit->add_option("--prior-a", fo.a, "IG shape");
    fit->add_option("--prior-lambda", fo.lambda, "IG scale");
    fit->add_option("--phi-s-grid", fo.phi_s_grid, "comma-separated spatial decay grid");
    fit->add_option("--phi-t-grid", fo.phi_t_grid, "comma-separated temporal decay grid");
    fit->add_option("--log1p", fo.log1p_cols, "covariate columns to log1p-transform");
    fit->add_option("--workers", fo.workers, "max concurrent subset chains");
    fit->add_flag("--phi-exponent-literal", fo.phi_literal,
                  "use the printed decay-parameter conditional without the 1/2 factor");
    fit->add_option("--out", fo.out, "output directory")->required();

    // ---- predict ----
    auto* pred = app.add_subcommand("predict", "Predict responses for a test dataset");
    struct {
        std::string train, test, fit_dir, log1p_cols, out;
        bool per_subset = false;
    } po;
    pred->add_option("--train", po.train, "training dataset CSV")->required();
    pred->add_option("--test", po.test, "test dataset CSV")->required();
    pred->add_option("--fit-dir", po.fit_dir, "directory written by fit")->required();
    pred->add_option("--log1p", po.log1p_cols, "covariate columns to log1p-transform");
    pred->add_flag("--per-subset", po.per_subset, "emit per-subset predictive means");
    pred->add_option("--out", po.out, "output directory")->required();

    // ---- diagnose ----
    auto* diag = app.add_subcommand("diagnose", "Moran / ACF diagnostics");
    struct {
        std::string data, fit_dir, log1p_cols, out;
        int max_lag = 20;
        double alpha = 0.01;
        bool residual = false;
        bool cell_median = false;
    } dgo;
    diag->add_option("--data", dgo.data, "dataset CSV")->required();
    diag->add_option("--fit-dir", dgo.fit_dir, "fit directory (enables residual mode)");
    diag->add_option("--log1p", dgo.log1p_cols, "covariate columns to log1p-transform");
    diag->add_option("--max-lag", dgo.max_lag);
    diag->add_option("--alpha", dgo.alpha, "significance level");
    diag->add_flag("--residual", dgo.residual, "diagnose model residuals (needs --fit-dir)");
    diag->add_flag("--cell-median", dgo.cell_median, "summarize cells by median instead of mean");
    diag->add_option("--out", dgo.out, "output directory")->required();

    // ---- evaluate ----
    auto* eval = app.add_subcommand("evaluate", "Metrics + APE brackets from a predictions CSV");
    struct {
        std::string predictions, truth_col = "truth", pred_col = "combined_y", out;
    } eo;
    eval->add_option("--predictions", eo.predictions, "predictions CSV")->required();
    eval->add_option("--truth-col", eo.truth_col);
    eval->add_option("--pred-col", eo.pred_col);
    eval->add_option("--out", eo.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (*sim) {
            write_run_stamp(sim, so.out);
            TrueParams params;
            auto beta = parse_double_list(so.beta);
            params.beta = Eigen::Map<Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()));
            params.sigma_eps2 = so.sigma_eps2;
            params.sigma_v2 = so.sigma_v2;
            params.phi_s = so.phi_s;
            params.phi_t = so.phi_t;
            CovariateSpec spec;
            spec.include_trend = !so.no_trend;
            spec.n_extra = so.n_extra;
            LatLonBox box{so.lat_min, so.lat_max, so.lon_min, so.lon_max};
            auto [ds, truth] = simulate(so.S, so.T, so.mean_replicates, params, spec, so.seed, box);
            save_dataset(ds, so.out + "/dataset.csv");
            save_truth(truth, ds, so.out + "/truth_params.txt", so.out + "/truth_v.csv");
            std::cout << "wrote " << ds.N() << " observations (" << ds.S() << " locations, "
                      << ds.T << " time points) to " << so.out << "\n";
        } else if (*fit) {
            write_run_stamp(fit, fo.out);
            Dataset ds = load_checked(fo.data);
            if (!fo.log1p_cols.empty()) apply_log1p(ds, parse_string_list(fo.log1p_cols));

            Priors priors{fo.c, fo.a, fo.lambda};
            MCMCConfig cfg;
            cfg.iterations = fo.iterations;
            cfg.burn_in = fo.burn_in;
            cfg.thin = fo.thin;
            cfg.seed = fo.seed;
            try {
                cfg.variant = parse_variant(fo.variant);
            } catch (const std::exception& e) {
                std::cerr << e.what() << "\n";
                return 2;
            }
            cfg.phi_exponent_literal = fo.phi_literal;
            auto phi_s = fo.phi_s_grid.empty() ? default_phi_s_grid()
                                               : parse_double_list(fo.phi_s_grid);
            auto phi_t = fo.phi_t_grid.empty() ? default_phi_t_grid()
                                               : parse_double_list(fo.phi_t_grid);

            auto t0 = std::chrono::steady_clock::now();
            Partition part = partition_locations(ds, fo.Q, fo.seed);
            save_partition(part, ds, fo.out + "/partition.csv");
            DnCFit dnc = fit_dnc(ds, part, priors, cfg, phi_s, phi_t, fo.workers);
            auto t1 = std::chrono::steady_clock::now();
            CombinedPosterior combined = wasp_combine(dnc.fits);
            combined.v_estimate = stack_v(dnc.fits, part, ds.S(), ds.T);
            auto t2 = std::chrono::steady_clock::now();

            for (const auto& f : dnc.fits) {
                save_chain(f.chain, fo.out + "/chain_" + std::to_string(f.subset_index) + ".csv");
                save_v_mean(f.chain, f.design, ds,
                            fo.out + "/v_mean_" + std::to_string(f.subset_index) + ".csv");
            }
            save_matrix_csv(combined.wasp_draws, combined.names, fo.out + "/combined_draws.csv");
            save_summary(summarize(combined), fo.out + "/summary.csv");
            save_v_hat(combined.v_estimate, ds, fo.out + "/v_hat.csv");

            {
                csv::Writer w(fo.out + "/geweke.csv");
                w.row("subset,parameter,z,converged");
                for (const auto& f : dnc.fits)
                    for (std::size_t j = 0; j < f.chain.geweke.names.size(); ++j)
                        w.row(f.subset_index, f.chain.geweke.names[j], f.chain.geweke.z[j],
                              f.chain.geweke.converged ? 1 : 0);
            }
            save_keyvalue({{"phi_s_grid", join_doubles(phi_s)},
                           {"phi_t_grid", join_doubles(phi_t)},
                           {"variant", fo.variant},
                           {"seed", std::to_string(fo.seed)},
                           {"Q", std::to_string(fo.Q)}},
                          fo.out + "/fit_meta.txt");
            auto secs = [](auto a, auto b) {
                return std::chrono::duration<double>(b - a).count();
            };
            save_keyvalue({{"sampling_seconds", std::to_string(secs(t0, t1))},
                           {"combine_seconds", std::to_string(secs(t1, t2))}},
                          fo.out + "/timings.txt");
            bool all_converged = true;
            for (const auto& f : dnc.fits) all_converged &= f.chain.geweke.converged;
            std::cout << "fit complete; Q=" << fo.Q << ", geweke "
                      << (all_converged ? "converged" : "NOT converged") << "\n";
        } else if (*pred) {
            write_run_stamp(pred, po.out);
            Dataset train = load_checked(po.train);
            Dataset test = load_checked(po.test);
            if (!po.log1p_cols.empty()) {
                auto cols = parse_string_list(po.log1p_cols);
                apply_log1p(train, cols);
                apply_log1p(test, cols);
            }
            DnCFit dnc = [&] {
                try {
                    return load_fit(po.fit_dir, train);
                } catch (const std::exception& e) {
                    throw DataError(std::string("cannot load fit artifacts: ") + e.what());
                }
            }();
            BatchPrediction bp = predict_batch(dnc, train, test);

            csv::Writer w(po.out + "/predictions.csv");
            {
                std::string header = "location_id,lat,lon,time_index,truth,combined_y,combined_sd,ape_percent";
                if (po.per_subset)
                    for (std::size_t q = 0; q < dnc.fits.size(); ++q)
                        header += ",y_mean_subset" + std::to_string(q);
                w.row(header);
            }
            std::vector<double> apes;
            for (std::size_t i = 0; i < bp.records.size(); ++i) {
                const auto& obs = test.observations[i];
                const auto& loc = test.locations[static_cast<std::size_t>(obs.location_index)];
                const auto& rec = bp.records[i];
                double ape = obs.response != 0.0
                                 ? 100.0 * std::abs((rec.combined_y - obs.response) / obs.response)
                                 : std::numeric_limits<double>::quiet_NaN();
                if (std::isfinite(ape)) apes.push_back(ape);
                std::ostringstream line;
                line.precision(12);
                line << loc.id << ',' << loc.lat << ',' << loc.lon << ',' << obs.time_index << ','
                     << obs.response << ',' << rec.combined_y << ','
                     << std::sqrt(rec.combined_y_var) << ',' << ape;
                if (po.per_subset)
                    for (const auto& s : rec.per_subset) line << ',' << s.y_mean;
                w.row(line.str());
            }
            save_metrics(bp.metrics, po.out + "/metrics.txt");
            save_ape_brackets(ape_brackets(apes), static_cast<int>(apes.size()),
                              po.out + "/ape_brackets.csv");
            std::cout << "predicted " << bp.records.size() << " rows; MAPE = " << bp.metrics.MAPE
                      << "%\n";
        } else if (*diag) {
            write_run_stamp(diag, dgo.out);
            Dataset ds = load_checked(dgo.data);
            if (!dgo.log1p_cols.empty()) apply_log1p(ds, parse_string_list(dgo.log1p_cols));
            if (dgo.residual && dgo.fit_dir.empty()) {
                std::cerr << "diagnose: --residual requires --fit-dir\n";
                return 2;
            }

            std::vector<double> values;
            if (dgo.residual) {
                csv::Table summary = [&] {
                    try {
                        return csv::read_file(dgo.fit_dir + "/summary.csv");
                    } catch (const std::exception& e) {
                        throw DataError(e.what());
                    }
                }();
                int c_name = summary.column("parameter"), c_mean = summary.column("mean");
                Vector beta = Vector::Zero(ds.m() + 1);
                for (const auto& row : summary.rows) {
                    const std::string& nm = row[static_cast<std::size_t>(c_name)];
                    if (nm.rfind("beta_", 0) == 0) {
                        int idx = std::stoi(nm.substr(5));
                        if (idx <= ds.m())
                            beta(idx) = csv::parse_double(row[static_cast<std::size_t>(c_mean)],
                                                          "summary.csv");
                    }
                }
                Vector v_hat = load_v_hat(dgo.fit_dir + "/v_hat.csv", ds);
                values = residuals(ds, beta, v_hat);
                MetricsReport fit_metrics;
                {
                    std::vector<double> truth, fitted;
                    for (std::size_t i = 0; i < ds.observations.size(); ++i) {
                        truth.push_back(ds.observations[i].response);
                        fitted.push_back(ds.observations[i].response - values[i]);
                    }
                    fit_metrics = metrics(truth, fitted);
                }
                save_metrics(fit_metrics, dgo.out + "/fit_metrics.txt");
            } else {
                for (const auto& obs : ds.observations) values.push_back(obs.response);
            }

            Matrix D = distance_matrix(ds.locations);
            auto slices = per_time_moran(ds, values, D, dgo.alpha, dgo.cell_median);
            {
                csv::Writer w(dgo.out + "/moran.csv");
                w.row("time_index,I,z,p,significant,note");
                for (const auto& s : slices) {
                    std::ostringstream line;
                    line.precision(12);
                    line << s.time_index << ',' << s.result.I << ',' << s.result.z << ','
                         << s.result.p_value << ',' << (s.ok && s.result.significant ? 1 : 0)
                         << ',' << s.note;
                    w.row(line.str());
                }
            }
            auto acfs = per_location_acf(ds, values, dgo.max_lag, dgo.alpha);
            {
                csv::Writer w(dgo.out + "/acf.csv");
                w.row("location_id,lag,acf,bound");
                for (const auto& la : acfs) {
                    if (!la.ok) continue;
                    for (std::size_t k = 0; k < la.result.acf.size(); ++k)
                        w.row(la.location_id, k, la.result.acf[k], la.result.bound);
                }
            }
            int sig = 0, ok = 0;
            for (const auto& s : slices)
                if (s.ok) {
                    ++ok;
                    sig += s.result.significant ? 1 : 0;
                }
            std::cout << "Moran significant in " << sig << "/" << ok << " time slices\n";
        } else if (*eval) {
            write_run_stamp(eval, eo.out);
            csv::Table t = [&] {
                try {
                    return csv::read_file(eo.predictions);
                } catch (const std::exception& e) {
                    throw DataError(e.what());
                }
            }();
            int c_y = t.column(eo.truth_col), c_p = t.column(eo.pred_col);
            if (c_y < 0 || c_p < 0) throw DataError("evaluate: missing truth/prediction column");
            std::vector<double> y, yhat, apes;
            for (const auto& row : t.rows) {
                double truth = csv::parse_double(row[static_cast<std::size_t>(c_y)], eo.predictions);
                double p = csv::parse_double(row[static_cast<std::size_t>(c_p)], eo.predictions);
                y.push_back(truth);
                yhat.push_back(p);
                if (truth != 0.0) apes.push_back(100.0 * std::abs((p - truth) / truth));
            }
            MetricsReport m = metrics(y, yhat);
            save_metrics(m, eo.out + "/metrics.txt");
            save_ape_brackets(ape_brackets(apes), static_cast<int>(apes.size()),
                              eo.out + "/ape_brackets.csv");
            std::cout << "MAPE = " << m.MAPE << "%, RMSE = " << m.RMSE << "\n";
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
