#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "kowcpi/runner.hpp"
#include "kowcpi/version.hpp"

// Command-line front end. Configuration precedence: flags > config file >
// defaults. Every run writes a manifest (the fully resolved configuration)
// so any output can be replayed bit-exactly.

namespace {

struct FlagOverrides {
    std::string config_path;
    std::string output_dir;
    std::string input_csv;
    std::string generator;
    std::string window_mode;
    std::string kernel;
    std::string bandwidth_mode;
    std::string predictor;
    std::string predictions_path;
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds;
    std::vector<std::size_t> candidates;
    double alpha = -1.0;
    double h = -1.0;
    double beta_step = -1.0;
    double phi = -10.0;
    double sigma = -1.0;
    double p_threshold = -1.0;
    double aci_gamma = -1.0;
    long long length = -1;
    long long burn_in = -1;
    long long history = -1;
    long long w = -1;
    long long trees = -1;
    long long lags = -1;
    long long rolling_m = -1;
    bool write_steps = false;
};

void add_common_flags(CLI::App* cmd, FlagOverrides& f) {
    cmd->add_option("--config", f.config_path, "JSON configuration file");
    cmd->add_option("--output-dir", f.output_dir, "output directory");
    cmd->add_option("--input-csv", f.input_csv, "input series CSV (header with column y)");
    cmd->add_option("--generator", f.generator,
                    "synthetic input: hetero-mixture | nonstationary-seasonal | ar1");
    cmd->add_option("--length", f.length, "generator series length");
    cmd->add_option("--burn-in", f.burn_in, "generator burn-in");
    cmd->add_option("--phi", f.phi, "ar1 coefficient");
    cmd->add_option("--sigma", f.sigma, "ar1 noise scale");
    cmd->add_option("--seed", f.seeds, "seed(s); repeat for multiple");
    cmd->add_option("--alpha", f.alpha, "target miscoverage level");
    cmd->add_option("--history", f.history, "residual buffer length T (0 = all pre-test residuals)");
    cmd->add_option("--window-mode", f.window_mode, "fixed | cv | adaptive");
    cmd->add_option("--w", f.w, "fixed window length");
    cmd->add_option("--candidates", f.candidates, "window candidate list");
    cmd->add_option("--p-threshold", f.p_threshold, "adaptive window p-value threshold");
    cmd->add_option("--kernel", f.kernel, "epanechnikov | gaussian | boxcar");
    cmd->add_option("--bandwidth-mode", f.bandwidth_mode, "aic | rule-of-thumb | fixed");
    cmd->add_option("--bandwidth", f.h, "fixed bandwidth value");
    cmd->add_option("--beta-step", f.beta_step, "beta grid step");
    cmd->add_option("--predictor", f.predictor,
                    "random-forest | lag-least-squares | external");
    cmd->add_option("--predictions", f.predictions_path, "external predictions CSV (t,yhat)");
    cmd->add_option("--trees", f.trees, "random forest tree count");
    cmd->add_option("--lags", f.lags, "predictor lag count (0 = auto)");
    cmd->add_option("--rolling-m", f.rolling_m, "rolling coverage window");
    cmd->add_option("--aci-gamma", f.aci_gamma, "ACI step size");
    cmd->add_option("--methods", f.methods, "methods: kowcpi plain-nw scp aci");
    cmd->add_flag("--write-steps", f.write_steps, "write per-step interval CSVs");
}

kowcpi::json merged_config(const FlagOverrides& f) {
    kowcpi::json j = kowcpi::json::object();
    if (!f.config_path.empty()) j = kowcpi::load_json_file(f.config_path);

    auto ensure = [&](const char* key) -> kowcpi::json& {
        if (!j.contains(key) || !j[key].is_object()) j[key] = kowcpi::json::object();
        return j[key];
    };

    if (!f.input_csv.empty()) {
        j["input"] = {{"csv", f.input_csv}};
    }
    if (!f.generator.empty()) {
        auto& input = ensure("input");
        input.erase("csv");
        if (!input.contains("generator") || !input["generator"].is_object()) {
            input["generator"] = kowcpi::json::object();
        }
        input["generator"]["kind"] = f.generator;
    }
    auto* gen = (j.contains("input") && j["input"].contains("generator"))
                    ? &j["input"]["generator"]
                    : nullptr;
    if (gen) {
        if (f.length >= 0) (*gen)["length"] = f.length;
        if (f.burn_in >= 0) (*gen)["burn_in"] = f.burn_in;
        if (f.phi > -10.0) (*gen)["phi"] = f.phi;
        if (f.sigma >= 0.0) (*gen)["sigma"] = f.sigma;
    }
    if (!f.seeds.empty()) j["seeds"] = f.seeds;
    if (f.alpha > 0.0) j["alpha"] = f.alpha;
    if (f.history >= 0) j["history"] = f.history;
    if (f.beta_step > 0.0) j["beta_step"] = f.beta_step;
    if (f.rolling_m > 0) j["rolling_m"] = f.rolling_m;
    if (f.aci_gamma >= 0.0) j["aci_gamma"] = f.aci_gamma;
    if (!f.window_mode.empty()) ensure("window")["mode"] = f.window_mode;
    if (f.w > 0) ensure("window")["w"] = f.w;
    if (!f.candidates.empty()) ensure("window")["candidates"] = f.candidates;
    if (f.p_threshold > 0.0) ensure("window")["p_threshold"] = f.p_threshold;
    if (!f.kernel.empty()) ensure("kernel")["family"] = f.kernel;
    if (!f.bandwidth_mode.empty()) {
        auto& kernel = ensure("kernel");
        if (!kernel.contains("bandwidth") || !kernel["bandwidth"].is_object()) {
            kernel["bandwidth"] = kowcpi::json::object();
        }
        kernel["bandwidth"]["mode"] = f.bandwidth_mode;
    }
    if (f.h > 0.0) {
        auto& kernel = ensure("kernel");
        if (!kernel.contains("bandwidth") || !kernel["bandwidth"].is_object()) {
            kernel["bandwidth"] = kowcpi::json::object();
        }
        kernel["bandwidth"]["h"] = f.h;
    }
    if (!f.predictor.empty()) ensure("predictor")["kind"] = f.predictor;
    if (!f.predictions_path.empty()) ensure("predictor")["path"] = f.predictions_path;
    if (f.trees > 0) ensure("predictor")["trees"] = f.trees;
    if (f.lags >= 0) ensure("predictor")["lags"] = f.lags;
    if (!f.methods.empty()) j["methods"] = f.methods;
    if (!f.output_dir.empty()) j["output_dir"] = f.output_dir;
    if (f.write_steps) j["write_steps"] = true;
    return j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"KOWCPI: sequential conformal prediction intervals for time series"};
    app.set_version_flag("--version", kowcpi::library_version);
    app.require_subcommand(1);

    FlagOverrides f_predict, f_bench, f_generate, f_tune;
    auto* predict = app.add_subcommand("predict", "run the interval pipeline on one series");
    add_common_flags(predict, f_predict);
    auto* bench = app.add_subcommand("bench", "multi-seed benchmark across methods");
    add_common_flags(bench, f_bench);
    auto* generate = app.add_subcommand("generate", "emit synthetic series as CSV");
    add_common_flags(generate, f_generate);
    auto* tune = app.add_subcommand("tune", "report selected bandwidth and window");
    add_common_flags(tune, f_tune);

    CLI11_PARSE(app, argc, argv);

    try {
        if (predict->parsed()) {
            return kowcpi::cmd_predict(kowcpi::run_config_from_json(merged_config(f_predict)));
        }
        if (bench->parsed()) {
            return kowcpi::cmd_bench(kowcpi::run_config_from_json(merged_config(f_bench)));
        }
        if (generate->parsed()) {
            return kowcpi::cmd_generate(kowcpi::run_config_from_json(merged_config(f_generate)));
        }
        if (tune->parsed()) {
            return kowcpi::cmd_tune(kowcpi::run_config_from_json(merged_config(f_tune)));
        }
    } catch (const kowcpi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const kowcpi::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
