// mmfl: config-driven entry point for the desk-scale multimodal federated
// learning simulator. Subcommands: gen-data, train, grid, ablate, analyze.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmfl/analysis.hpp"
#include "mmfl/checkpoint.hpp"
#include "mmfl/config.hpp"
#include "mmfl/dataset.hpp"
#include "mmfl/errors.hpp"
#include "mmfl/federation.hpp"
#include "mmfl/rng.hpp"

namespace fs = std::filesystem;
using namespace mmfl;

namespace {

struct Invocation {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = ".";
    int workers = 0;  // 0 -> keep config value
};

ExperimentConfig load(const Invocation& inv) {
    try {
        ExperimentConfig cfg =
            inv.config_path.empty() ? ExperimentConfig{} : load_config(inv.config_path);
        for (const auto& o : inv.overrides) apply_override(cfg, o);
        if (inv.workers > 0) cfg.fed.workers = inv.workers;
        cfg.validate();
        return cfg;
    } catch (const FormatError& e) {
        // config problems are validation failures (exit 2), unlike data-file
        // format errors encountered mid-run
        throw ValidationError(e.what());
    }
}

std::string resolve_out(const Invocation& inv) {
    const char* env = std::getenv("MMFL_OUTPUT_DIR");
    std::string out = (env && *env) ? std::string(env) : inv.out_dir;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IOFailure("cannot create output directory '" + out + "': " + ec.message());
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct Experiment {
    MultimodalDataset test;                 // unmasked server test set
    std::vector<MultimodalDataset> shards;  // masked per-client train shards
    ModelConfig model_cfg;
};

// Dataset -> split -> partition -> per-client fixed train masks.
Experiment prepare(const ExperimentConfig& cfg) {
    MultimodalDataset full =
        cfg.dataset_dir.empty()
            ? generate_synthetic(static_cast<size_t>(cfg.n_samples),
                                 static_cast<size_t>(cfg.n_modalities),
                                 static_cast<size_t>(cfg.feature_len),
                                 static_cast<size_t>(cfg.n_classes), cfg.class_separation,
                                 derive_seed(cfg.seed, "synthetic"))
            : load_dataset(cfg.dataset_dir);

    auto [train, test] = train_test_split(full, cfg.test_fraction,
                                          derive_seed(cfg.seed, "split"));
    Partition part =
        cfg.partition == "iid"
            ? partition_iid(train.n_samples(), static_cast<size_t>(cfg.fed.n_clients),
                            derive_seed(cfg.seed, "partition"))
            : partition_dirichlet(train.labels, train.n_classes,
                                  static_cast<size_t>(cfg.fed.n_clients), cfg.dirichlet_alpha,
                                  derive_seed(cfg.seed, "partition"));

    Experiment exp;
    exp.test = std::move(test);
    for (size_t k = 0; k < part.assignments.size(); ++k) {
        MultimodalDataset shard = train.subset(part.assignments[k]);
        MissingMask mask = make_missing_mask(shard.n_samples(), shard.n_modalities(),
                                             cfg.train_stats,
                                             derive_seed(cfg.seed, "client_mask", k));
        exp.shards.push_back(apply_mask(shard, mask));
    }
    exp.model_cfg = cfg.model_config(train.feature_lens(), train.n_classes);
    return exp;
}

void write_rounds_header(std::ofstream& out) {
    out << "round,global_accuracy,mean_l_task,mean_l_ds,mean_l_rc,mean_relevance,"
           "global_profile_size,sampled_clients\n";
}

void write_round_row(std::ofstream& out, const RoundRecord& r) {
    out << r.round << ',' << fmt(r.accuracy) << ',' << fmt(r.mean_l_task) << ','
        << fmt(r.mean_l_ds) << ',' << fmt(r.mean_l_rc) << ',' << fmt(r.mean_relevance) << ','
        << r.profile_size << ',';
    for (size_t i = 0; i < r.sampled.size(); ++i) out << (i ? ";" : "") << r.sampled[i];
    out << '\n';
    out.flush();
}

// Runs one federation, streaming rounds to csv_path (header only when T=0).
std::vector<RoundRecord> run_experiment(const ExperimentConfig& cfg, const Experiment& exp,
                                        GlobalState& state, const std::string& csv_path,
                                        const std::string& ckpt_dir) {
    std::ofstream csv(csv_path);
    if (!csv) throw IOFailure("cannot open '" + csv_path + "'");
    write_rounds_header(csv);

    FederationConfig fed = cfg.fed;
    fed.seed = cfg.seed;
    fed.test_stats = cfg.test_stats;

    std::vector<RoundRecord> records;
    for (int t = 0; t < fed.rounds; ++t) {
        records.push_back(run_round(state, exp.shards, fed, exp.test, nullptr));
        write_round_row(csv, records.back());
        if (!ckpt_dir.empty() && fed.checkpoint_every > 0 && (t + 1) % fed.checkpoint_every == 0)
            save_checkpoint({state, fed.lambda, fed.eta},
                            ckpt_dir + "/round_" + std::to_string(t + 1));
    }
    if (!ckpt_dir.empty())
        save_checkpoint({state, fed.lambda, fed.eta}, ckpt_dir + "/final");
    return records;
}

int cmd_gen_data(const Invocation& inv) {
    ExperimentConfig cfg = load(inv);
    std::string out = resolve_out(inv);
    std::string target = cfg.dataset_dir.empty() ? out + "/dataset" : cfg.dataset_dir;
    MultimodalDataset ds = generate_synthetic(
        static_cast<size_t>(cfg.n_samples), static_cast<size_t>(cfg.n_modalities),
        static_cast<size_t>(cfg.feature_len), static_cast<size_t>(cfg.n_classes),
        cfg.class_separation, derive_seed(cfg.seed, "synthetic"));
    save_dataset(ds, target);
    std::cout << "dataset written to " << target << "\n";
    return 0;
}

int cmd_train(const Invocation& inv) {
    ExperimentConfig cfg = load(inv);
    std::string out = resolve_out(inv);
    Experiment exp = prepare(cfg);
    GlobalState state = init_global(exp.model_cfg, cfg.seed);
    auto records = run_experiment(cfg, exp, state, out + "/rounds.csv", out + "/checkpoints");
    double final_acc =
        records.empty()
            ? evaluate_global(state, exp.test, cfg.test_stats, derive_seed(cfg.seed, "eval", 0),
                              cfg.fed.workers)
            : records.back().accuracy;
    std::cout << "accuracy=" << fmt(final_acc) << "\n";
    return 0;
}

int cmd_grid(const Invocation& inv) {
    ExperimentConfig cfg = load(inv);
    std::string out = resolve_out(inv);
    if (cfg.grid_train_stats.empty() || cfg.grid_test_stats.empty())
        throw ValidationError("grid: grid.train_stats and grid.test_stats must be non-empty");

    std::ofstream csv(out + "/grid.csv");
    if (!csv) throw IOFailure("cannot open '" + out + "/grid.csv'");
    csv << "train_pm,train_ps,test_pm,test_ps,accuracy\n";

    for (const auto& tr : cfg.grid_train_stats) {
        if (tr.p_m == 1.0 && tr.p_s == 1.0) {
            for (const auto& te : cfg.grid_test_stats)
                csv << fmt(tr.p_m) << ',' << fmt(tr.p_s) << ',' << fmt(te.p_m) << ','
                    << fmt(te.p_s) << ",excluded\n";
            continue;
        }
        ExperimentConfig cell = cfg;
        cell.train_stats = tr;
        Experiment exp = prepare(cell);
        GlobalState state = init_global(exp.model_cfg, cell.seed);
        FederationConfig fed = cell.fed;
        fed.seed = cell.seed;
        fed.test_stats = cell.test_stats;
        for (int t = 0; t < fed.rounds; ++t) run_round(state, exp.shards, fed, exp.test, nullptr);

        for (const auto& te : cfg.grid_test_stats) {
            csv << fmt(tr.p_m) << ',' << fmt(tr.p_s) << ',' << fmt(te.p_m) << ',' << fmt(te.p_s)
                << ',';
            if (te.p_m == 1.0 && te.p_s == 1.0) {
                csv << "excluded\n";
                continue;
            }
            double acc = evaluate_global(state, exp.test, te,
                                         derive_seed(cell.seed, "grid_eval", fed.rounds),
                                         fed.workers);
            csv << fmt(acc) << '\n';
        }
        csv.flush();
    }
    std::cout << "grid written to " << out << "/grid.csv\n";
    return 0;
}

int cmd_ablate(const Invocation& inv) {
    ExperimentConfig base = load(inv);
    std::string out = resolve_out(inv);
    std::ofstream csv(out + "/ablate.csv");
    if (!csv) throw IOFailure("cannot open '" + out + "/ablate.csv'");
    csv << "method,final_accuracy\n";
    for (Method m : {Method::pepsy, Method::pepsy_np, Method::pepsy_nr, Method::fedavg_plain,
                     Method::fedprox}) {
        ExperimentConfig cfg = base;
        cfg.fed.method = m;
        Experiment exp = prepare(cfg);
        GlobalState state = init_global(exp.model_cfg, cfg.seed);
        auto records = run_experiment(cfg, exp, state,
                                      out + "/rounds_" + method_name(m) + ".csv",
                                      out + "/checkpoints_" + method_name(m));
        double acc = records.empty()
                         ? evaluate_global(state, exp.test, cfg.test_stats,
                                           derive_seed(cfg.seed, "eval", 0), cfg.fed.workers)
                         : records.back().accuracy;
        csv << method_name(m) << ',' << fmt(acc) << '\n';
        csv.flush();
    }
    std::cout << "ablation written to " << out << "/ablate.csv\n";
    return 0;
}

int cmd_analyze(const Invocation& inv) {
    ExperimentConfig cfg = load(inv);
    std::string out = resolve_out(inv);
    if (cfg.analyze_checkpoints.empty())
        throw ValidationError("analyze: analyze.checkpoints must be non-empty");
    if (cfg.analyze_lambdas.size() != cfg.analyze_checkpoints.size())
        throw ValidationError("analyze: analyze.lambdas and analyze.checkpoints must pair up");
    for (const auto& path : cfg.analyze_checkpoints)
        if (!fs::exists(path + "/meta.txt"))
            throw ValidationError("analyze: missing checkpoint '" + path + "'");
    std::vector<int> sizes = cfg.analyze_missing_sizes;
    if (sizes.empty())
        for (int s = 0; s < cfg.n_modalities; ++s) sizes.push_back(s);

    Experiment exp = prepare(cfg);  // analysis reads the server test split

    std::ofstream bound(out + "/bound.csv");
    if (!bound) throw IOFailure("cannot open '" + out + "/bound.csv'");
    bound << "lambda,missing_size,mean_deviation,mean_lds,mu_estimate,rhs_value\n";
    for (size_t i = 0; i < cfg.analyze_checkpoints.size(); ++i) {
        Checkpoint ckpt = load_checkpoint(cfg.analyze_checkpoints[i]);
        ClientModel model = ckpt.state.instantiate();
        for (int s : sizes) {
            BoundEstimate est = estimate_bound(model, exp.test, s, cfg.analyze_n_patterns,
                                               derive_seed(cfg.seed, "analyze", i,
                                                           static_cast<uint64_t>(s)));
            bound << fmt(cfg.analyze_lambdas[i]) << ',' << s << ',' << fmt(est.mean_deviation)
                  << ',' << fmt(est.mean_lds) << ',' << fmt(est.lipschitz_mu) << ','
                  << fmt(est.rhs_value) << '\n';
        }
        bound.flush();
    }

    Checkpoint first = load_checkpoint(cfg.analyze_checkpoints.front());
    if (first.state.model_cfg.method != Method::fedavg_plain &&
        first.state.model_cfg.method != Method::fedprox) {
        ClientModel model = first.state.instantiate();
        export_embeddings(model, exp.test,
                          parse_embed_patterns(cfg.embed_patterns, cfg.n_modalities),
                          out + "/embeddings.csv");
    }
    std::cout << "analysis written to " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale multimodal federated learning simulator"};
    app.require_subcommand(1);
    {
        std::string footer = "Config keys (file or --set):";
        for (const auto& key : config_keys()) footer += "\n  " + key;
        app.footer(footer);
    }

    Invocation inv;
    app.add_option("--config,-c", inv.config_path, "key=value config file")
        ->check(CLI::ExistingFile);
    app.add_option("--set,-s", inv.overrides, "dotted key=value override (repeatable)");
    app.add_option("--out,-o", inv.out_dir, "output directory (MMFL_OUTPUT_DIR wins)");
    app.add_option("--workers,-w", inv.workers, "cap on concurrent client training");

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset directory");
    auto* train = app.add_subcommand("train", "run one federation, write rounds.csv");
    auto* grid = app.add_subcommand("grid", "train/test missing-statistics grid, write grid.csv");
    auto* ablate = app.add_subcommand("ablate", "run every method variant on one config");
    auto* analyze = app.add_subcommand("analyze", "bound + embedding exports from checkpoints");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // --help is exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // invalid arguments
    }

    try {
        if (gen->parsed()) return cmd_gen_data(inv);
        if (train->parsed()) return cmd_train(inv);
        if (grid->parsed()) return cmd_grid(inv);
        if (ablate->parsed()) return cmd_ablate(inv);
        if (analyze->parsed()) return cmd_analyze(inv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
