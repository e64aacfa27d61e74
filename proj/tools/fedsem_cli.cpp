// Command-line front end for the federated zero-shot IDS simulator.
//
// Subcommands mirror the pipeline stages: `run` executes everything, the
// others materialize individual stages for inspection. All stages are
// deterministic in (config, seed), so `train` and `infer` re-derive earlier
// stages in memory instead of requiring `gen` first.

#include "fedsem/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "fedsem/csv.hpp"
#include "fedsem/rng.hpp"

namespace fs = std::filesystem;
using namespace fedsem;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

ExperimentConfig resolve_config(const GlobalOptions& opts) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = load_experiment_config(opts.config_path);
    if (opts.seed) {
        cfg.seed = *opts.seed;
        cfg.federation.seed = *opts.seed;
    }
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    cfg.validate();
    std::cout << "# resolved configuration\n" << resolved_config_ini(cfg) << std::flush;
    return cfg;
}

std::vector<LocalDataset> derive_clients(const ExperimentConfig& cfg, const SyntheticData& data) {
    return partition_non_iid(data.train_pool, cfg.federation.num_clients, cfg.dirichlet_beta,
                             mix_seed(cfg.seed, 0x9a27));
}

int cmd_prototypes(const ExperimentConfig& cfg) {
    const PrototypeSet protos = build_all_prototypes(cfg);
    fs::create_directories(cfg.out_dir);
    save_prototypes_csv((fs::path(cfg.out_dir) / "prototypes.csv").string(), protos);

    // per-encoder magnitude statistics across concepts
    CsvWriter csv((fs::path(cfg.out_dir) / "prototype_strength.csv").string());
    csv.row({"encoder_id", "mean_norm (L2)", "population_std_norm (L2)"});
    for (std::size_t e = 0; e < 3; ++e) {
        std::vector<SemanticEmbedding> members;
        for (const auto& p : protos) members.push_back(p.members.at(e));
        const auto [mean, std_dev] = semantic_strength(members);
        csv.row({members.front().encoder_id, format_double(mean), format_double(std_dev)});
    }
    std::cout << "wrote " << protos.size() << " prototypes to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_gen(const ExperimentConfig& cfg) {
    const SyntheticData data = generate_synthetic_dataset(cfg);
    const auto clients = derive_clients(cfg, data);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out / "data");
    save_prototypes_csv((out / "prototypes.csv").string(), data.prototypes);
    for (const auto& c : clients) {
        save_dataset_csv((out / "data" / ("train_client_" + std::to_string(c.client_id) + ".csv"))
                             .string(),
                         c.samples, cfg.feature_dim);
    }
    save_dataset_csv((out / "data" / "test.csv").string(), data.test_samples, cfg.feature_dim);
    std::cout << "wrote " << clients.size() << " client partitions and "
              << data.test_samples.size() << " test samples to " << (out / "data").string()
              << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    const SyntheticData data = generate_synthetic_dataset(cfg);
    const auto clients = derive_clients(cfg, data);
    std::vector<AttackScenario> scenarios;
    for (const auto& [name, a] : cfg.attacks) scenarios.push_back(a);
    std::vector<int> ids;
    for (const auto& c : clients) ids.push_back(c.client_id);
    ScenarioEngine engine(scenarios, ids);

    FederatedSimulation sim(clients, data.prototypes, cfg.federation,
                            Matrix::Zero(cfg.embedding_dim, cfg.feature_dim));
    sim.set_interceptor(engine.interceptor(sim.clients(), data.prototypes));

    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    for (int t = 0; t < cfg.federation.rounds; ++t) {
        sim.run_round();
        if (cfg.federation.write_round_snapshots) {
            save_matrix((out / ("w_round_" + std::to_string(t) + ".bin")).string(),
                        sim.global_matrix());
        }
    }
    save_rounds_csv((out / "rounds.csv").string(), sim.history());
    save_matrix((out / "w_global.bin").string(), sim.global_matrix());
    if (!engine.events().empty()) {
        save_attacks_csv((out / "attacks.csv").string(), engine.events());
    }
    const auto& last = sim.history().back();
    std::cout << "trained " << cfg.federation.rounds << " rounds; final H=" << last.entropy
              << " checksum=" << last.global_checksum << "\n";
    return 0;
}

int cmd_infer(const ExperimentConfig& cfg) {
    const fs::path out(cfg.out_dir);
    const Matrix W = load_matrix((out / "w_global.bin").string());
    const PrototypeSet protos = load_prototypes_csv((out / "prototypes.csv").string());
    const auto test = load_dataset_csv((out / "data" / "test.csv").string());
    const auto novel = cfg.novel_concepts();
    std::vector<bool> is_novel;
    is_novel.reserve(test.size());
    for (const auto& s : test) {
        is_novel.push_back(s.label &&
                           std::find(novel.begin(), novel.end(), *s.label) != novel.end());
    }
    const auto rows = assess_batch(test, is_novel, W, protos, cfg.lambda, cfg.zds_mode);
    save_assessments_csv((out / "assessments.csv").string(), rows);
    std::cout << "assessed " << rows.size() << " samples into "
              << (out / "assessments.csv").string() << "\n";
    return 0;
}

int cmd_report(const ExperimentConfig& cfg) {
    const fs::path out(cfg.out_dir);
    const auto reports = load_rounds_csv((out / "rounds.csv").string());
    const auto assessments = load_assessments_csv((out / "assessments.csv").string());
    fs::create_directories(out / "metrics");

    const EntropySeries entropy = trust_entropy_series(reports);
    save_series_csv((out / "metrics" / "entropy_shift.csv").string(), entropy.shift, "t (round)",
                    "entropy_shift (nats)");
    save_series_csv((out / "metrics" / "entropy_delta.csv").string(), entropy.delta, "t (round)",
                    "delta_entropy (nats)");

    std::vector<std::string> attributed;
    std::vector<std::string> truth;
    std::vector<double> zds;
    std::vector<bool> novel;
    std::vector<double> d_used;
    std::vector<double> confidence;
    for (const auto& a : assessments) {
        if (!a.is_novel) {
            attributed.push_back(a.assessment.attributed_concept);
            truth.push_back(a.true_label);
        }
        zds.push_back(a.assessment.zds);
        novel.push_back(a.is_novel);
        d_used.push_back(a.assessment.disagreement_used);
        confidence.push_back(a.assessment.confidence);
    }
    const double accuracy = zero_shot_accuracy(attributed, truth);
    const double discrimination = auroc(zds, novel);
    const auto curve = binned_curve(d_used, confidence, cfg.confidence_bins);

    CsvWriter summary((out / "metrics" / "summary.csv").string());
    summary.row({"metric", "value"});
    summary.row({"seen_accuracy (fraction)", format_double(accuracy)});
    summary.row({"zds_auroc (probability)", format_double(discrimination)});
    summary.row({"entropy_fit_slope (nats/round)", format_double(entropy.fit.slope)});
    summary.row({"confidence_curve_non_increasing (bool)", curve.monotone_decreasing ? "1" : "0"});

    CsvWriter curve_csv((out / "metrics" / "confidence_vs_disagreement.csv").string());
    curve_csv.row({"disagreement_bin_center (unit distance)", "mean_confidence (cosine)"});
    for (const auto& [center, mean] : curve.bins) {
        curve_csv.row({format_double(center), format_double(mean)});
    }
    std::cout << "seen_accuracy=" << accuracy << " zds_auroc=" << discrimination
              << " entropy_slope=" << entropy.fit.slope << "\n";
    return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
    const RunSummary s = run_experiment(cfg, true);
    std::cout << "seen_accuracy=" << s.seen_accuracy << "\n"
              << "zds_auroc=" << s.zds_auroc << "\n"
              << "entropy_slope=" << s.entropy.fit.slope << "\n"
              << "convergence_round=" << s.convergence_round << "\n"
              << "outputs=" << s.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated zero-shot intrusion detection simulator"};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "Experiment config file (INI sections)")
        ->check(CLI::ExistingFile);
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Override the experiment seed");
    app.add_option("--out", opts.out_dir, "Override the output directory");

    auto* run = app.add_subcommand("run", "Full pipeline: data, training, inference, metrics");
    auto* gen = app.add_subcommand("gen", "Synthesize prototypes, client partitions and test data");
    auto* prototypes = app.add_subcommand("prototypes", "Build and dump prototypes + disagreements");
    auto* train = app.add_subcommand("train", "Federated rounds; writes rounds.csv and w_global.bin");
    auto* infer = app.add_subcommand("infer", "Batch assessment of the test split");
    auto* report = app.add_subcommand("report", "Recompute metrics CSVs from rounds/assessments logs");
    for (auto* sub : {run, gen, prototypes, train, infer, report}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) opts.seed = seed_value;

    try {
        const ExperimentConfig cfg = resolve_config(opts);
        if (run->parsed()) return cmd_run(cfg);
        if (gen->parsed()) return cmd_gen(cfg);
        if (prototypes->parsed()) return cmd_prototypes(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (infer->parsed()) return cmd_infer(cfg);
        if (report->parsed()) return cmd_report(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
