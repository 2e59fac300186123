#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "kowcpi/csv.hpp"
#include "kowcpi/datagen.hpp"
#include "kowcpi/errors.hpp"
#include "kowcpi/evaluation.hpp"
#include "kowcpi/version.hpp"

// Run orchestration shared by the CLI subcommands: JSON configuration with
// defaults, validation and full resolution, manifest files that make every
// run replayable, and the command drivers themselves.

namespace kowcpi {

using nlohmann::json;

struct InputConfig {
    std::string csv_path;                     // one of csv_path / generator
    std::optional<GeneratorSpec> generator;
};

struct RunConfig {
    InputConfig input;
    RunSpec run;
    std::vector<std::uint64_t> seeds = {1};
    std::vector<Method> methods = {Method::kowcpi, Method::scp, Method::aci};
    std::string output_dir = "out";
    bool write_steps = false;
};

namespace detail {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("invalid value for key '" + key + "'");
    }
}

inline const json* child(const json& j, const std::string& key) {
    return j.contains(key) ? &j.at(key) : nullptr;
}

} // namespace detail

inline json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    try {
        if (const auto* input = detail::child(j, "input")) {
            cfg.input.csv_path = detail::get_or<std::string>(*input, "csv", "");
            if (const auto* gen = detail::child(*input, "generator")) {
                GeneratorSpec spec;
                spec.kind = generator_kind_from_string(
                    detail::get_or<std::string>(*gen, "kind", "ar1"));
                spec.length = detail::get_or<std::size_t>(*gen, "length", 1000);
                spec.burn_in = detail::get_or<std::size_t>(*gen, "burn_in", 200);
                spec.phi = detail::get_or<double>(*gen, "phi", 0.8);
                spec.sigma = detail::get_or<double>(*gen, "sigma", 1.0);
                cfg.input.generator = spec;
            }
        }
        cfg.run.alpha = detail::get_or<double>(j, "alpha", cfg.run.alpha);
        cfg.run.history = detail::get_or<std::size_t>(j, "history", cfg.run.history);
        cfg.run.beta_step = detail::get_or<double>(j, "beta_step", cfg.run.beta_step);
        cfg.run.rolling_m = detail::get_or<std::size_t>(j, "rolling_m", cfg.run.rolling_m);
        cfg.run.aci_gamma = detail::get_or<double>(j, "aci_gamma", cfg.run.aci_gamma);
        if (const auto* split = detail::child(j, "split")) {
            cfg.run.train_fraction =
                detail::get_or<double>(*split, "train", cfg.run.train_fraction);
            cfg.run.tune_fraction = detail::get_or<double>(*split, "tune", cfg.run.tune_fraction);
        }
        if (const auto* window = detail::child(j, "window")) {
            const auto mode =
                window_mode_from_string(detail::get_or<std::string>(*window, "mode", "fixed"));
            cfg.run.window.mode = mode;
            cfg.run.window.fixed_w =
                detail::get_or<std::size_t>(*window, "w", cfg.run.window.fixed_w);
            cfg.run.window.candidates = detail::get_or<std::vector<std::size_t>>(
                *window, "candidates", cfg.run.window.candidates);
            cfg.run.window.p_threshold =
                detail::get_or<double>(*window, "p_threshold", cfg.run.window.p_threshold);
        }
        if (const auto* kernel = detail::child(j, "kernel")) {
            cfg.run.kernel = kernel_family_from_string(
                detail::get_or<std::string>(*kernel, "family", "epanechnikov"));
            if (const auto* bw = detail::child(*kernel, "bandwidth")) {
                cfg.run.bandwidth.mode =
                    bandwidth_mode_from_string(detail::get_or<std::string>(*bw, "mode", "aic"));
                cfg.run.bandwidth.fixed_h =
                    detail::get_or<double>(*bw, "h", cfg.run.bandwidth.fixed_h);
                cfg.run.bandwidth.grid_size =
                    detail::get_or<std::size_t>(*bw, "grid_size", cfg.run.bandwidth.grid_size);
                cfg.run.bandwidth.grid_span =
                    detail::get_or<double>(*bw, "grid_span", cfg.run.bandwidth.grid_span);
                cfg.run.bandwidth.explicit_grid = detail::get_or<std::vector<double>>(
                    *bw, "grid", cfg.run.bandwidth.explicit_grid);
                cfg.run.bandwidth.reselect_every = detail::get_or<std::size_t>(
                    *bw, "reselect_every", cfg.run.bandwidth.reselect_every);
            }
        }
        if (const auto* pred = detail::child(j, "predictor")) {
            cfg.run.predictor.kind = predictor_kind_from_string(
                detail::get_or<std::string>(*pred, "kind", "random-forest"));
            cfg.run.predictor.lags =
                detail::get_or<std::size_t>(*pred, "lags", cfg.run.predictor.lags);
            cfg.run.predictor.ridge =
                detail::get_or<double>(*pred, "ridge", cfg.run.predictor.ridge);
            cfg.run.predictor.trees =
                detail::get_or<std::size_t>(*pred, "trees", cfg.run.predictor.trees);
            cfg.run.predictor.max_depth =
                detail::get_or<std::size_t>(*pred, "max_depth", cfg.run.predictor.max_depth);
            cfg.run.predictor.min_leaf =
                detail::get_or<std::size_t>(*pred, "min_leaf", cfg.run.predictor.min_leaf);
            cfg.run.predictor.features_per_split = detail::get_or<std::size_t>(
                *pred, "features_per_split", cfg.run.predictor.features_per_split);
            cfg.run.predictor.path =
                detail::get_or<std::string>(*pred, "path", cfg.run.predictor.path);
        }
        cfg.seeds = detail::get_or<std::vector<std::uint64_t>>(j, "seeds", cfg.seeds);
        if (j.contains("seed")) cfg.seeds = {j.at("seed").get<std::uint64_t>()};
        if (j.contains("methods")) {
            cfg.methods.clear();
            for (const auto& m : j.at("methods")) {
                cfg.methods.push_back(method_from_string(m.get<std::string>()));
            }
        }
        cfg.output_dir = detail::get_or<std::string>(j, "output_dir", cfg.output_dir);
        cfg.write_steps = detail::get_or<bool>(j, "write_steps", cfg.write_steps);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    if (cfg.input.csv_path.empty() && !cfg.input.generator) {
        throw ConfigError("input: exactly one of input.csv or input.generator is required");
    }
    if (!cfg.input.csv_path.empty() && cfg.input.generator) {
        throw ConfigError("input: csv and generator are mutually exclusive");
    }
    if (cfg.seeds.empty()) throw ConfigError("seeds must be nonempty");
    if (cfg.methods.empty()) throw ConfigError("methods must be nonempty");
    cfg.run.validate();
    return cfg;
}

inline json run_config_to_json(const RunConfig& cfg) {
    json j;
    json input;
    if (!cfg.input.csv_path.empty()) input["csv"] = cfg.input.csv_path;
    if (cfg.input.generator) {
        const auto& g = *cfg.input.generator;
        input["generator"] = {{"kind", std::string(to_string(g.kind))},
                              {"length", g.length},
                              {"burn_in", g.burn_in},
                              {"phi", g.phi},
                              {"sigma", g.sigma}};
    }
    j["input"] = input;
    j["alpha"] = cfg.run.alpha;
    j["history"] = cfg.run.history;
    j["beta_step"] = cfg.run.beta_step;
    j["rolling_m"] = cfg.run.rolling_m;
    j["aci_gamma"] = cfg.run.aci_gamma;
    j["split"] = {{"train", cfg.run.train_fraction}, {"tune", cfg.run.tune_fraction}};
    j["window"] = {{"mode", std::string(to_string(cfg.run.window.mode))},
                   {"w", cfg.run.window.fixed_w},
                   {"candidates", cfg.run.window.candidates},
                   {"p_threshold", cfg.run.window.p_threshold}};
    j["kernel"] = {{"family", std::string(to_string(cfg.run.kernel))},
                   {"bandwidth",
                    {{"mode", std::string(to_string(cfg.run.bandwidth.mode))},
                     {"h", cfg.run.bandwidth.fixed_h},
                     {"grid_size", cfg.run.bandwidth.grid_size},
                     {"grid_span", cfg.run.bandwidth.grid_span},
                     {"grid", cfg.run.bandwidth.explicit_grid},
                     {"reselect_every", cfg.run.bandwidth.reselect_every}}}};
    j["predictor"] = {{"kind", std::string(to_string(cfg.run.predictor.kind))},
                      {"lags", cfg.run.predictor.lags},
                      {"ridge", cfg.run.predictor.ridge},
                      {"trees", cfg.run.predictor.trees},
                      {"max_depth", cfg.run.predictor.max_depth},
                      {"min_leaf", cfg.run.predictor.min_leaf},
                      {"features_per_split", cfg.run.predictor.features_per_split},
                      {"path", cfg.run.predictor.path}};
    j["seeds"] = cfg.seeds;
    json methods = json::array();
    for (Method m : cfg.methods) methods.push_back(std::string(to_string(m)));
    j["methods"] = methods;
    j["output_dir"] = cfg.output_dir;
    j["write_steps"] = cfg.write_steps;
    return j;
}

inline std::vector<double> series_for_seed(const RunConfig& cfg, std::uint64_t seed) {
    if (cfg.input.generator) {
        GeneratorSpec spec = *cfg.input.generator;
        spec.seed = seed;
        return generate(spec);
    }
    return ingest_csv(cfg.input.csv_path);
}

inline std::shared_ptr<const FittedPredictor> maybe_external_predictor(const RunConfig& cfg) {
    if (cfg.run.predictor.kind != PredictorKind::external) return {};
    return std::make_shared<const FittedPredictor>(
        external_predictor(read_predictions_csv(cfg.run.predictor.path)));
}

inline void write_manifest(const RunConfig& cfg, const std::string& command,
                           const std::filesystem::path& dir) {
    json manifest = run_config_to_json(cfg);
    manifest["kowcpi_version"] = library_version;
    manifest["command"] = command;
    if (cfg.input.generator &&
        cfg.input.generator->kind == GeneratorKind::nonstationary_seasonal) {
        json betas;
        for (std::uint64_t seed : cfg.seeds) {
            betas[std::to_string(seed)] = seasonal_beta(seed);
        }
        manifest["derived_seasonal_beta"] = betas;
    }
    std::ofstream out(dir / "manifest.json");
    if (!out.good()) throw DataError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

namespace detail {

inline std::filesystem::path prepare_output_dir(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline json report_json(const EvaluationReport& report) {
    return {{"coverage", report.marginal_coverage},
            {"mean_width", report.mean_width},
            {"steps", report.per_step.size()},
            {"rolling_m", report.rolling_m}};
}

} // namespace detail

inline int cmd_generate(const RunConfig& cfg) {
    if (!cfg.input.generator) throw ConfigError("generate requires input.generator");
    const auto dir = detail::prepare_output_dir(cfg);
    for (std::uint64_t seed : cfg.seeds) {
        GeneratorSpec spec = *cfg.input.generator;
        spec.seed = seed;
        const auto series = generate(spec);
        write_series_csv(dir / ("series_seed" + std::to_string(seed) + ".csv"), series);
    }
    write_manifest(cfg, "generate", dir);
    return 0;
}

inline int cmd_predict(const RunConfig& cfg) {
    const auto dir = detail::prepare_output_dir(cfg);
    const std::uint64_t seed = cfg.seeds.front();
    const auto series = series_for_seed(cfg, seed);
    const Method methods[] = {Method::kowcpi};
    const auto run = run_series(series, cfg.run, seed, methods, maybe_external_predictor(cfg));
    const auto& report = run.reports.at(Method::kowcpi);
    write_intervals_csv(dir / "intervals.csv", report.per_step);

    json metrics = detail::report_json(report);
    metrics["resolved"] = {{"lags", run.resolved.lags},
                           {"history", run.resolved.history},
                           {"window", run.resolved.window},
                           {"bandwidth", run.resolved.bandwidth}};
    std::ofstream out(dir / "metrics.json");
    out << metrics.dump(2) << '\n';
    write_manifest(cfg, "predict", dir);
    return 0;
}

inline int cmd_bench(const RunConfig& cfg) {
    const auto dir = detail::prepare_output_dir(cfg);
    auto source = [&](std::uint64_t seed) { return series_for_seed(cfg, seed); };
    const auto result = run_benchmark(source, cfg.run, cfg.seeds, cfg.methods,
                                      maybe_external_predictor(cfg));

    std::ofstream table(dir / "results.csv");
    if (!table.good()) throw DataError("cannot write results.csv in " + dir.string());
    table << "method,coverage_mean,coverage_std,width_mean,width_std\n";
    for (const auto& row : result.table) {
        table << to_string(row.method) << ',' << detail::fmt_double(row.coverage_mean) << ','
              << detail::fmt_double(row.coverage_std) << ',' << detail::fmt_double(row.width_mean)
              << ',' << detail::fmt_double(row.width_std) << '\n';
    }
    table.close();

    json per_seed = json::array();
    for (std::size_t i = 0; i < result.seeds.size(); ++i) {
        json entry;
        entry["seed"] = result.seeds[i];
        for (const auto& [method, report] : result.runs[i].reports) {
            entry[std::string(to_string(method))] = detail::report_json(report);
        }
        per_seed.push_back(entry);
    }
    json summary;
    summary["table"] = json::array();
    for (const auto& row : result.table) {
        summary["table"].push_back({{"method", std::string(to_string(row.method))},
                                    {"coverage_mean", row.coverage_mean},
                                    {"coverage_std", row.coverage_std},
                                    {"width_mean", row.width_mean},
                                    {"width_std", row.width_std}});
    }
    summary["per_seed"] = per_seed;
    std::ofstream out(dir / "results.json");
    out << summary.dump(2) << '\n';

    if (cfg.write_steps) {
        for (std::size_t i = 0; i < result.seeds.size(); ++i) {
            for (const auto& [method, report] : result.runs[i].reports) {
                const auto name = std::string("steps_") + std::string(to_string(method)) +
                                  "_seed" + std::to_string(result.seeds[i]) + ".csv";
                write_intervals_csv(dir / name, report.per_step);
            }
        }
    }
    write_manifest(cfg, "bench", dir);
    return 0;
}

inline int cmd_tune(const RunConfig& cfg) {
    const auto dir = detail::prepare_output_dir(cfg);
    const std::uint64_t seed = cfg.seeds.front();
    const auto series = series_for_seed(cfg, seed);
    const Method methods[] = {Method::kowcpi};
    const auto run = run_series(series, cfg.run, seed, methods, maybe_external_predictor(cfg));

    if (run.resolved.bandwidth_selection) {
        std::ofstream curve(dir / "aic_curve.csv");
        curve << "h,aic,admissible\n";
        for (const auto& [h, score] : run.resolved.bandwidth_selection->curve) {
            curve << detail::fmt_double(h) << ',';
            if (score) curve << detail::fmt_double(*score);
            curve << ',' << (score ? 1 : 0) << '\n';
        }
    }
    if (!run.resolved.cv_candidates.empty()) {
        std::ofstream cv(dir / "window_cv.csv");
        cv << "w,coverage,mean_width\n";
        for (std::size_t i = 0; i < run.resolved.cv_candidates.size(); ++i) {
            cv << run.resolved.cv_candidates[i] << ','
               << detail::fmt_double(run.resolved.cv_scores[i].coverage) << ','
               << detail::fmt_double(run.resolved.cv_scores[i].mean_width) << '\n';
        }
    }
    if (cfg.run.window.mode == WindowMode::adaptive) {
        std::ofstream trace(dir / "window_trace.csv");
        trace << "t,w,h\n";
        for (const auto& d : run.kowcpi_diagnostics) {
            trace << d.t << ',' << d.window_used << ',' << detail::fmt_double(d.bandwidth_used)
                  << '\n';
        }
    }

    json summary;
    summary["selected"] = {{"lags", run.resolved.lags},
                           {"history", run.resolved.history},
                           {"window", run.resolved.window},
                           {"bandwidth", run.resolved.bandwidth},
                           {"bandwidth_fallback",
                            run.resolved.bandwidth_selection
                                ? run.resolved.bandwidth_selection->fallback
                                : false}};
    std::ofstream out(dir / "tune_summary.json");
    out << summary.dump(2) << '\n';
    write_manifest(cfg, "tune", dir);
    return 0;
}

} // namespace kowcpi
