#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "zmc/diagnostics.hpp"
#include "zmc/errors.hpp"
#include "zmc/estimation.hpp"
#include "zmc/experiment.hpp"
#include "zmc/io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kParse = 2, kInfeasible = 3, kNotConverged = 4 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::string out = ".";
    std::string column;
    std::string input;
    std::string fit;
    std::optional<std::size_t> n;
    std::optional<std::size_t> replicates;
    std::size_t bootstrap = 0;
    bool write_intensity = false;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw zmc::ParseError("cannot open config " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw zmc::ParseError("config " + path + ": " + e.what());
    }
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::uint64_t require_seed(const Options& opt, const json& cfg) {
    if (opt.seed) return *opt.seed;
    if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
    throw zmc::ParseError("a seed is required (--seed or config.seed)");
}

const json& model_block(const json& cfg) {
    if (!cfg.contains("model")) throw zmc::ParseError("config needs a model block");
    return cfg.at("model");
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw zmc::Error("cannot write " + path.string());
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
}

json metadata(const std::string& command, const json& cfg, std::optional<std::uint64_t> seed) {
    json m;
    m["command"] = command;
    m["config_hash"] = zmc::config_hash(cfg);
    m["version"] = kVersion;
    if (seed) m["seed"] = *seed;
    return m;
}

zmc::CountSeries load_counts(const Options& opt, const json& cfg) {
    const std::string input = !opt.input.empty() ? opt.input : value_or<std::string>(cfg, "input", "");
    if (input.empty()) throw zmc::ParseError("no input counts (--input or config.input)");
    const std::string column = !opt.column.empty() ? opt.column : value_or<std::string>(cfg, "column", "");
    return zmc::read_counts_csv(fs::path(input), column);
}

int cmd_simulate(const Options& opt, const json& cfg) {
    const auto spec = zmc::model_from_json(model_block(cfg));
    spec.validate();
    const std::uint64_t seed = require_seed(opt, cfg);
    const std::size_t n = opt.n ? *opt.n : value_or<std::size_t>(cfg, "n", 1000);
    zmc::RandomSource rng(seed);
    const auto path = zmc::simulate_intensity(spec.intensity, n, rng);
    const auto series = zmc::zm_sample(spec.family, path, spec.params, rng);

    const fs::path out(opt.out);
    fs::create_directories(out);
    auto csv = open_out(out / "counts.csv");
    zmc::write_counts_csv(csv, series, opt.write_intensity ? &path : nullptr);
    auto meta = metadata("simulate", cfg, seed);
    meta["n"] = n;
    meta["model"] = zmc::to_json(spec);
    write_text(out / "metadata.json", zmc::dump_json(meta));
    return kOk;
}

int cmd_fit(const Options& opt, const json& cfg) {
    const auto model = zmc::structure_from_json(model_block(cfg));
    const auto fit_cfg = zmc::fit_config_from_json(cfg.value("fit", json()));
    const auto series = load_counts(opt, cfg);
    auto res = zmc::fit_model(series.counts, model, fit_cfg);
    std::optional<std::uint64_t> seed;
    if (opt.bootstrap > 0 && res.converged) {
        seed = require_seed(opt, cfg);
        auto q = res.params_hat;
        q.c = model.c;
        const auto spec = zmc::ModelSpec::make(model.family, model.intensity, q);
        const auto boot = zmc::bootstrap_se(spec, series.size(), opt.bootstrap, *seed, fit_cfg, opt.jobs);
        res.se = boot.se;
        std::cerr << "bootstrap: " << boot.completed << " refits, " << boot.failed << " failed\n";
    }

    const fs::path out(opt.out);
    fs::create_directories(out);
    write_text(out / "fit.json", zmc::dump_json(zmc::fit_result_to_json(res, model)));
    {
        auto f = open_out(out / "filtered.csv");
        zmc::write_filter_csv(f, series.counts, res.filtered);
    }
    {
        auto f = open_out(out / "residuals.csv");
        zmc::write_residuals_csv(f, res.residuals);
    }
    auto meta = metadata("fit", cfg, seed);
    meta["fit_config"] = zmc::to_json(fit_cfg);
    write_text(out / "metadata.json", zmc::dump_json(meta));

    const auto& q = res.params_hat;
    std::cout << "omega=" << zmc::format_double(q.omega) << " rho=" << zmc::format_double(q.rho)
              << " beta=" << zmc::format_double(q.beta) << " p=" << zmc::format_double(q.p);
    if (model.family == zmc::CountFamily::ZMNB) std::cout << " a=" << zmc::format_double(q.a);
    std::cout << (q.omega < 0.0 ? " (zero deflation)" : "") << '\n';
    if (!res.converged) {
        std::cerr << "estimating equations did not converge (max |EF|/n = " << res.ef_norm << ")\n";
        return kNotConverged;
    }
    return kOk;
}

zmc::ModelSpec spec_from_fit(const Options& opt, const json& cfg, zmc::FitResult& fit) {
    std::string path = !opt.fit.empty() ? opt.fit : value_or<std::string>(cfg, "fit_result", "");
    if (path.empty()) throw zmc::ParseError("no fit result (--fit or config.fit_result)");
    const auto j = load_config(path);
    zmc::ModelStructure model;
    try {
        fit = zmc::fit_result_from_json(j, model);
    } catch (const json::exception& e) {
        throw zmc::ParseError("fit result " + path + ": " + e.what());
    }
    auto q = fit.params_hat;
    q.c = model.c;
    return zmc::ModelSpec::make(model.family, model.intensity, q);
}

int cmd_filter(const Options& opt, const json& cfg) {
    zmc::ModelSpec spec;
    if (!opt.fit.empty() || cfg.contains("fit_result")) {
        zmc::FitResult fit;
        spec = spec_from_fit(opt, cfg, fit);
    } else {
        spec = zmc::model_from_json(model_block(cfg));
    }
    spec.validate();
    const auto series = load_counts(opt, cfg);
    const auto pass = zmc::gkf_filter(series, spec);
    const fs::path out(opt.out);
    fs::create_directories(out);
    auto f = open_out(out / "filtered.csv");
    zmc::write_filter_csv(f, series.counts, pass);
    return kOk;
}

int cmd_diagnose(const Options& opt, const json& cfg) {
    zmc::FitResult fit;
    const auto spec = spec_from_fit(opt, cfg, fit);
    spec.validate();
    const auto series = load_counts(opt, cfg);
    const std::size_t lags = value_or<std::size_t>(cfg, "lags", 20);
    const std::size_t kmax = value_or<std::size_t>(cfg, "kmax", 10);
    const std::uint64_t seed = opt.seed ? *opt.seed : value_or<std::uint64_t>(cfg, "seed", 0);

    const auto pass = zmc::gkf_filter(series, spec);
    std::vector<double> filtered(pass.size());
    for (std::size_t t = 0; t < pass.size(); ++t) filtered[t] = pass.states[t].lambda_filtered;
    const auto resid = zmc::pearson_residuals(series.counts, filtered, spec.params, spec.family);

    std::vector<double> raw(series.counts.begin(), series.counts.end());
    zmc::RandomSource rng(seed);
    auto table = zmc::fitted_marginal_probs(spec, kmax, rng);
    table.empirical = zmc::empirical_probs(series.counts, kmax);

    const fs::path out(opt.out);
    fs::create_directories(out);
    {
        auto f = open_out(out / "residuals.csv");
        zmc::write_residuals_csv(f, resid);
    }
    {
        auto f = open_out(out / "acf.csv");
        zmc::write_acf_csv(f, "counts", zmc::sample_acf_pacf(raw, lags));
        zmc::write_acf_csv(f, "residuals", zmc::sample_acf_pacf(resid, lags));
    }
    {
        auto f = open_out(out / "probabilities.csv");
        zmc::write_prob_table_csv(f, table);
    }
    json lb;
    auto add = [&](const char* name, const zmc::LjungBox& r) {
        lb[name] = {{"statistic", r.statistic}, {"p_value", r.p_value}, {"lags", r.lags}};
    };
    add("residuals", zmc::ljung_box(resid, lags));
    add("counts", zmc::ljung_box(std::span<const std::int64_t>(series.counts), lags));
    add("counts_lag1", zmc::ljung_box(std::span<const std::int64_t>(series.counts), 1));
    lb["fitted_zero_prob"] = table.fitted.at(0);
    lb["empirical_zero_prob"] = table.empirical.at(0);
    lb["mc_error"] = table.mc_error;
    write_text(out / "ljung_box.json", zmc::dump_json(lb));
    return kOk;
}

int cmd_reproduce(const Options& opt, const json& cfg) {
    if (!cfg.contains("experiment")) throw zmc::ParseError("config needs an experiment block");
    const auto& exp = cfg.at("experiment");
    const auto& base = model_block(cfg);
    const std::uint64_t seed = require_seed(opt, cfg);

    zmc::ExperimentConfig ec;
    ec.n = opt.n ? *opt.n : value_or<std::size_t>(exp, "n", 1000);
    ec.replicates = opt.replicates ? *opt.replicates : value_or<std::size_t>(exp, "replicates", 200);
    ec.jobs = opt.jobs;
    ec.fit = zmc::fit_config_from_json(cfg.value("fit", json()));

    json rows = exp.value("rows", json::array());
    if (rows.empty()) rows.push_back(json::object());

    const fs::path out(opt.out);
    fs::create_directories(out);
    auto csv = open_out(out / "experiment.csv");
    zmc::write_experiment_header(csv);
    bool any = false;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        json merged = base;
        for (const auto& [k, v] : rows[r].items()) merged[k] = v;
        ec.truth = zmc::model_from_json(merged);
        ec.truth.validate();
        // Each row gets its own stream family so rows can be rerun in isolation.
        ec.seed = seed + r;
        const auto row = zmc::run_experiment(ec);
        zmc::write_experiment_row(csv, row);
        any = any || row.completed > 0;
        std::cerr << "row " << r + 1 << ": " << row.completed << " completed, " << row.discarded << " discarded";
        for (const auto& [reason, count] : row.discard_reasons) std::cerr << ' ' << reason << '=' << count;
        std::cerr << '\n';
    }
    auto meta = metadata("reproduce", cfg, seed);
    meta["n"] = ec.n;
    meta["replicates"] = ec.replicates;
    meta["jobs"] = ec.jobs;
    write_text(out / "metadata.json", zmc::dump_json(meta));
    if (!any) {
        std::cerr << "every replicate failed\n";
        return kNotConverged;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-modified count time series: simulate, filter, fit, diagnose"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options opt;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON config file");
        sub->add_option("--out", opt.out, "output directory");
    };
    auto* sim = app.add_subcommand("simulate", "simulate a count series");
    common(sim);
    sim->add_option("--seed", opt.seed);
    sim->add_option("-n", opt.n, "series length");
    sim->add_flag("--intensity", opt.write_intensity, "also write the latent intensity");

    auto* fit = app.add_subcommand("fit", "estimate parameters");
    common(fit);
    fit->add_option("--input", opt.input, "counts CSV");
    fit->add_option("--column", opt.column, "column name or 0-based index");
    fit->add_option("--bootstrap", opt.bootstrap, "parametric bootstrap replicates for standard errors");
    fit->add_option("--seed", opt.seed, "bootstrap seed");
    fit->add_option("--jobs", opt.jobs)->check(CLI::PositiveNumber);

    auto* filt = app.add_subcommand("filter", "run the filter at given parameters");
    common(filt);
    filt->add_option("--input", opt.input, "counts CSV");
    filt->add_option("--column", opt.column);
    filt->add_option("--fit", opt.fit, "fit.json from a previous fit");

    auto* diag = app.add_subcommand("diagnose", "residual and marginal diagnostics");
    common(diag);
    diag->add_option("--input", opt.input, "counts CSV");
    diag->add_option("--column", opt.column);
    diag->add_option("--fit", opt.fit, "fit.json from a previous fit");
    diag->add_option("--seed", opt.seed, "seed for Monte-Carlo marginals");

    auto* rep = app.add_subcommand("reproduce", "Monte-Carlo experiment rows");
    common(rep);
    rep->add_option("--seed", opt.seed);
    rep->add_option("--jobs", opt.jobs)->check(CLI::PositiveNumber);
    rep->add_option("-n", opt.n, "series length");
    rep->add_option("--replicates", opt.replicates);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kParse;
    }

    try {
        const auto cfg = load_config(opt.config);
        if (*sim) return cmd_simulate(opt, cfg);
        if (*fit) return cmd_fit(opt, cfg);
        if (*filt) return cmd_filter(opt, cfg);
        if (*diag) return cmd_diagnose(opt, cfg);
        if (*rep) return cmd_reproduce(opt, cfg);
    } catch (const zmc::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kParse;
    } catch (const zmc::InvalidSpec& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kParse;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kParse;
    } catch (const zmc::InfeasibleOmega& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInfeasible;
    } catch (const zmc::InfeasibleInit& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInfeasible;
    } catch (const zmc::EstimationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNotConverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
