#include "alspipe/commands.hpp"
#include "alspipe/config.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
    std::string cache_dir;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "pipeline config file (TOML-style)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "RNG seed (overrides config)");
    cmd->add_option("--workers", args.workers, "worker thread count");
    cmd->add_option("--out", args.out, "output path for this command");
    cmd->add_option("--cache-dir", args.cache_dir, "fetch cache root")
        ->envname("ALSPIPE_CACHE_DIR");
    cmd->add_option("--set", args.overrides,
                    "override any config key, e.g. --set plan.patch_side=250");
}

alspipe::config::PipelineConfig resolve(const CommonArgs& args) {
    alspipe::config::PipelineConfig cfg;
    if (!args.config_path.empty())
        cfg = alspipe::config::load_config(args.config_path);
    if (args.seed)
        cfg.seed = *args.seed;
    if (args.workers)
        cfg.workers = *args.workers;
    if (!args.cache_dir.empty())
        cfg.backend.cache_dir = args.cache_dir;
    for (const auto& spec : args.overrides)
        alspipe::config::apply_override(cfg, spec);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ALS dataset construction pipeline: stratified tile sampling, fetch, "
                 "statistics, masked-autoencoder prep, window tiling, and metrics"};
    app.require_subcommand(1);

    CommonArgs plan_args, fetch_args, stats_args, prep_args, tile_args, eval_args;

    auto* plan = app.add_subcommand("plan", "label patches and emit a sampling manifest");
    add_common(plan, plan_args);
    auto* fetch = app.add_subcommand("fetch", "download and crop the manifest tiles");
    add_common(fetch, fetch_args);
    auto* stats = app.add_subcommand("stats", "per-tile and grouped dataset statistics");
    add_common(stats, stats_args);
    auto* prep = app.add_subcommand("prep", "build masked-BEV training samples");
    add_common(prep, prep_args);
    auto* tile = app.add_subcommand("tile", "sliding-window crops with train/val/test split");
    add_common(tile, tile_args);
    auto* eval = app.add_subcommand("eval", "IoU / mIoU / OA from label files");
    add_common(eval, eval_args);

    std::string eval_pred, eval_truth;
    eval->add_option("--pred", eval_pred, "predicted labels (CSV id,label or JSONL)");
    eval->add_option("--truth", eval_truth, "ground-truth labels");

    CLI11_PARSE(app, argc, argv);

    try {
        if (plan->parsed()) {
            auto cfg = resolve(plan_args);
            if (plan_args.out)
                cfg.plan.out = *plan_args.out;
            return alspipe::commands::run_plan(cfg, std::cout);
        }
        if (fetch->parsed()) {
            auto cfg = resolve(fetch_args);
            if (fetch_args.out)
                cfg.fetch.out = *fetch_args.out;
            return alspipe::commands::run_fetch(cfg, std::cout);
        }
        if (stats->parsed()) {
            auto cfg = resolve(stats_args);
            if (stats_args.out)
                cfg.stats.out = *stats_args.out;
            return alspipe::commands::run_stats(cfg, std::cout);
        }
        if (prep->parsed()) {
            auto cfg = resolve(prep_args);
            if (prep_args.out)
                cfg.prep.out = *prep_args.out;
            return alspipe::commands::run_prep(cfg, std::cout);
        }
        if (tile->parsed()) {
            auto cfg = resolve(tile_args);
            if (tile_args.out)
                cfg.tile.out = *tile_args.out;
            return alspipe::commands::run_tile(cfg, std::cout);
        }
        if (eval->parsed()) {
            auto cfg = resolve(eval_args);
            if (!eval_pred.empty())
                cfg.eval.pred = eval_pred;
            if (!eval_truth.empty())
                cfg.eval.truth = eval_truth;
            if (eval_args.out)
                cfg.eval.out = *eval_args.out;
            return alspipe::commands::run_eval(cfg, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
