#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fuelrec/pipeline.hpp"

namespace {

// Exit codes: 0 ok, 2 config/usage, 3 data, 4 internal.
constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;
constexpr int kInternalExit = 4;

}  // namespace

int main(int argc, char** argv) {
    using namespace fuelrec;
    CLI::App app{"Interpretable fuel-consumption anomaly explanations and recommendations"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, input, output, mode_name, synth_config;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "Pipeline config file (key = value)");
    app.add_option("--seed", seed, "Overrides the configured seed");
    app.add_option("--input", input, "Overrides the raw telemetry input path");
    app.add_option("--output", output, "Overrides the output directory");

    auto* ingest = app.add_subcommand("ingest", "Raw telemetry to the cleaned, imputed FAR");
    auto* detect = app.add_subcommand("detect", "Label the FAR with the two-pass box-plot detector");
    auto* train = app.add_subcommand("train", "Train the fuel model");
    auto* explain = app.add_subcommand("explain", "Explain outlier vehicle-dates and apply the rules");
    auto* recommend = app.add_subcommand("recommend", "Counterfactual recommendations, summary and manager view");
    auto* evaluate = app.add_subcommand("evaluate", "Metrics report and model contrasts");
    auto* synth = app.add_subcommand("synth", "Generate a synthetic fleet");
    auto* all = app.add_subcommand("run-all", "ingest, detect, then train/explain/recommend per mode, evaluate");
    for (auto* sc : {train, explain, recommend})
        sc->add_option("--mode", mode_name, "plain, monotone or ebm_var (default: model_mode)");
    synth->add_option("--synth-config", synth_config, "Synthetic fleet config file (key = value)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigExit;
    }

    try {
        if (synth->parsed()) {
            auto sc = synth_config.empty() ? SynthConfig::defaults() : SynthConfig::from_text(read_data_lines(synth_config));
            if (seed) sc.seed = *seed;
            std::cout << stage_synth(sc, output.empty() ? "synth" : output) << '\n';
            return 0;
        }

        auto cfg = load_config(config_path.empty() ? std::nullopt : std::optional<std::string>(config_path));
        if (seed) cfg.seed = *seed;
        if (!input.empty()) cfg.input_path = input;
        if (!output.empty()) cfg.output_dir = output;
        cfg.validate();
        const ModelMode mode = mode_name.empty() ? cfg.model_mode : parse_model_mode(mode_name);

        std::string log;
        if (ingest->parsed()) log = stage_ingest(cfg);
        else if (detect->parsed()) log = stage_detect(cfg);
        else if (train->parsed()) log = stage_train(cfg, mode);
        else if (explain->parsed()) log = stage_explain(cfg, mode);
        else if (recommend->parsed()) log = stage_recommend(cfg, mode);
        else if (evaluate->parsed()) log = stage_evaluate(cfg);
        else if (all->parsed()) log = run_all(cfg);
        std::cout << log << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigExit;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataExit;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternalExit;
    }
}
