#include "fedsem/experiment.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "fedsem/csv.hpp"
#include "fedsem/rng.hpp"

namespace fedsem {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::runtime_error("stage " + std::string(name) + " failed: " + e.what());
    }
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Novelty threshold sweep over assessment confidences: flag novel when
// confidence < threshold, score against the is_novel truth.
std::pair<double, double> best_confidence_threshold(const std::vector<AssessedSample>& rows,
                                                    std::vector<std::pair<double, double>>* sweep) {
    std::vector<double> candidates;
    candidates.reserve(rows.size());
    for (const auto& r : rows) candidates.push_back(r.assessment.confidence);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    double best_tau = 0.0;
    double best_acc = -1.0;
    for (double tau : candidates) {
        std::size_t correct = 0;
        for (const auto& r : rows) {
            const bool flagged = r.assessment.confidence < tau;
            if (flagged == r.is_novel) ++correct;
        }
        const double acc = static_cast<double>(correct) / static_cast<double>(rows.size());
        if (sweep) sweep->emplace_back(tau, acc);
        if (acc > best_acc) {
            best_acc = acc;
            best_tau = tau;
        }
    }
    return {best_tau, best_acc};
}

}  // namespace

std::vector<std::pair<double, double>> latency_corpus(const EncoderProfile& profile, int n,
                                                      int k, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("latency_corpus: n must be >= 1");
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::uint64_t item_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
        Rng rng(item_seed);
        const int tokens = static_cast<int>(rng.next_range(20, 180));
        // Index prefix keeps every corpus text distinct.
        const std::string text =
            "t" + std::to_string(i) + " " + filler_text(tokens - 1, item_seed);
        const EncodeResult r = encode(profile, text, k, seed);
        out.emplace_back(static_cast<double>(token_count(text)), r.latency_ms);
    }
    return out;
}

LatencyStudyRow latency_study(const EncoderProfile& profile, int n, int k, std::uint64_t seed) {
    const auto samples = latency_corpus(profile, n, k, seed);
    std::vector<double> tokens;
    std::vector<double> latencies;
    tokens.reserve(samples.size());
    latencies.reserve(samples.size());
    for (const auto& [t, l] : samples) {
        tokens.push_back(t);
        latencies.push_back(l);
    }
    LatencyStudyRow row;
    row.encoder_id = profile.encoder_id;
    const double n_d = static_cast<double>(latencies.size());
    row.mean_ms = 0.0;
    for (double l : latencies) row.mean_ms += l;
    row.mean_ms /= n_d;
    double var = 0.0;
    for (double l : latencies) var += (l - row.mean_ms) * (l - row.mean_ms);
    row.std_ms = std::sqrt(var / n_d);
    row.cv = coefficient_of_variation(latencies);
    row.fit = ols_fit(tokens, latencies);
    return row;
}

RunSummary run_experiment(const ExperimentConfig& config, bool write_outputs) {
    config.validate();
    RunSummary summary;
    summary.out_dir = config.out_dir;
    summary.config_digest = config_hash(config);

    const fs::path out(config.out_dir);
    if (write_outputs) {
        fs::create_directories(out / "data");
        fs::create_directories(out / "metrics");
        std::ofstream resolved(out / "resolved.ini", std::ios::binary);
        resolved << resolved_config_ini(config);
    }

    // Prototypes and planted synthetic corpus.
    PrototypeSet prototypes =
        stage("prototypes", [&] { return build_all_prototypes(config); });
    SyntheticData data = stage("datagen", [&] {
        return generate_synthetic_dataset(config, std::move(prototypes));
    });
    summary.planting_residual = data.planting_residual;

    std::vector<LocalDataset> clients = stage("partition", [&] {
        return partition_non_iid(data.train_pool, config.federation.num_clients,
                                 config.dirichlet_beta, mix_seed(config.seed, 0x9a27));
    });

    if (write_outputs) {
        save_prototypes_csv((out / "prototypes.csv").string(), data.prototypes);
        for (const auto& c : clients) {
            save_dataset_csv((out / "data" / ("train_client_" + std::to_string(c.client_id) +
                                              ".csv")).string(),
                             c.samples, config.feature_dim);
        }
        save_dataset_csv((out / "data" / "test.csv").string(), data.test_samples,
                         config.feature_dim);
    }

    // Federated rounds with attack interception and per-round client
    // embedding capture for the alignment series.
    std::vector<AttackScenario> scenarios;
    scenarios.reserve(config.attacks.size());
    for (const auto& [name, a] : config.attacks) scenarios.push_back(a);
    std::vector<int> client_ids;
    client_ids.reserve(clients.size());
    for (const auto& c : clients) client_ids.push_back(c.client_id);
    ScenarioEngine engine(scenarios, client_ids);

    std::map<int, Vector> client_mean_features;
    for (const auto& c : clients) {
        Vector mean = Vector::Zero(config.feature_dim);
        for (const auto& s : c.samples) mean += s.values;
        client_mean_features[c.client_id] = mean / static_cast<double>(c.samples.size());
    }
    std::vector<std::vector<std::pair<int, Vector>>> round_embeddings;

    FederatedSimulation sim(clients, data.prototypes, config.federation,
                            Matrix::Zero(config.embedding_dim, config.feature_dim));
    sim.set_interceptor([&](int t, std::vector<ClientUpdate>& updates) {
        engine.apply(t, updates, sim.clients(), data.prototypes);
        std::vector<std::pair<int, Vector>> embeddings;
        embeddings.reserve(updates.size());
        for (const auto& up : updates) {
            embeddings.emplace_back(up.client_id, up.W * client_mean_features.at(up.client_id));
        }
        round_embeddings.push_back(std::move(embeddings));
    });
    stage("federated_training", [&] {
        for (int t = 0; t < config.federation.rounds; ++t) {
            const RoundReport& rep = sim.run_round();
            if (write_outputs && config.federation.write_round_snapshots) {
                save_matrix((out / ("w_round_" + std::to_string(rep.t) + ".bin")).string(),
                            sim.global_matrix());
            }
        }
        return 0;
    });
    summary.reports = sim.history();
    summary.convergence_round = sim.convergence_round();
    summary.global_matrix = sim.global_matrix();
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        summary.scenario_clients.push_back(engine.clients_for(i));
    }

    // Trust-weighted centroid per round; alignment of submitted embeddings.
    summary.alignment.name = "alignment";
    for (std::size_t t = 0; t < round_embeddings.size(); ++t) {
        const RoundReport& rep = summary.reports[t];
        std::map<int, double> alphas;
        for (const auto& c : rep.clients) alphas[c.client_id] = c.alpha;
        std::vector<Vector> zs;
        Vector centroid = Vector::Zero(config.embedding_dim);
        for (const auto& [client_id, z] : round_embeddings[t]) {
            zs.push_back(z);
            centroid += alphas.at(client_id) * z;
        }
        summary.alignment.push(static_cast<double>(rep.t), alignment_score(zs, centroid));
    }

    // Inference on the held-out split, with inference-stage evasion first.
    std::vector<FeatureVector> test = data.test_samples;
    std::vector<AttackEvent> evasion_events;
    stage("inference", [&] {
        for (std::size_t si = 0; si < scenarios.size(); ++si) {
            const AttackScenario& sc = scenarios[si];
            if (sc.kind != AttackKind::evasion || sc.fraction_of_clients <= 0.0 || test.empty()) {
                continue;
            }
            const Vector& z_target = data.prototypes.begin()->fused.values;
            const Eigen::JacobiSVD<Matrix> svd(summary.global_matrix);
            const double sigma_max = svd.singularValues().size() > 0
                                         ? svd.singularValues()(0)
                                         : 0.0;
            const double step = sigma_max > 0.0 ? 0.9 / (2.0 * sigma_max * sigma_max) : 0.0;
            auto count = static_cast<std::size_t>(
                std::ceil(sc.fraction_of_clients * static_cast<double>(test.size())));
            count = std::clamp<std::size_t>(count, 1, test.size());
            std::vector<std::size_t> order(test.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            Rng rng(mix_seed(sc.seed, 0xe7a5));
            for (std::size_t i = order.size() - 1; i > 0; --i) {
                const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
                std::swap(order[i], order[j]);
            }
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t idx = order[i];
                test[idx].values = craft_evasion(test[idx].values, summary.global_matrix,
                                                 z_target, 100, step, sc.magnitude);
                evasion_events.push_back(AttackEvent{-1, static_cast<int>(idx),
                                                     AttackKind::evasion, sc.magnitude});
            }
        }
        summary.assessments = assess_batch(test, data.test_is_novel, summary.global_matrix,
                                           data.prototypes, config.lambda, config.zds_mode);
        return 0;
    });
    summary.attack_events = engine.events();
    summary.attack_events.insert(summary.attack_events.end(), evasion_events.begin(),
                                 evasion_events.end());

    // Metrics over the finished run.
    std::vector<std::pair<double, double>> threshold_sweep;
    stage("metrics", [&] {
        std::vector<std::string> attributed_seen;
        std::vector<std::string> truth_seen;
        std::vector<double> zds;
        std::vector<bool> novel;
        std::vector<double> d_used;
        std::vector<double> confidence;
        for (const auto& a : summary.assessments) {
            if (!a.is_novel) {
                attributed_seen.push_back(a.assessment.attributed_concept);
                truth_seen.push_back(a.true_label);
            }
            zds.push_back(a.assessment.zds);
            novel.push_back(a.is_novel);
            d_used.push_back(a.assessment.disagreement_used);
            confidence.push_back(a.assessment.confidence);
        }
        summary.seen_accuracy = zero_shot_accuracy(attributed_seen, truth_seen);
        summary.zds_auroc = auroc(zds, novel);
        summary.confidence_vs_disagreement =
            binned_curve(d_used, confidence, config.confidence_bins);
        summary.entropy = trust_entropy_series(summary.reports);
        std::tie(summary.best_threshold, summary.best_threshold_accuracy) =
            best_confidence_threshold(summary.assessments, &threshold_sweep);
        for (const auto& profile : config.encoders) {
            summary.latency.push_back(latency_study(profile, config.latency_samples,
                                                    config.embedding_dim,
                                                    mix_seed(config.seed, 0x1a7)));
        }
        return 0;
    });

    if (!write_outputs) {
        summary.prototypes = std::move(data.prototypes);
        return summary;
    }

    stage("report", [&] {
        save_rounds_csv((out / "rounds.csv").string(), summary.reports);
        if (!summary.attack_events.empty()) {
            save_attacks_csv((out / "attacks.csv").string(), summary.attack_events);
        }
        save_matrix((out / "w_global.bin").string(), summary.global_matrix);
        save_assessments_csv((out / "assessments.csv").string(), summary.assessments);

        save_series_csv((out / "metrics" / "entropy_shift.csv").string(), summary.entropy.shift,
                        "t (round)", "entropy_shift (nats)");
        save_series_csv((out / "metrics" / "entropy_delta.csv").string(), summary.entropy.delta,
                        "t (round)", "delta_entropy (nats)");
        save_series_csv((out / "metrics" / "alignment.csv").string(), summary.alignment,
                        "t (round)", "alignment (1/unit distance)");
        {
            CsvWriter csv((out / "metrics" / "confidence_vs_disagreement.csv").string());
            csv.row({"disagreement_bin_center (unit distance)", "mean_confidence (cosine)"});
            for (const auto& [center, mean] : summary.confidence_vs_disagreement.bins) {
                csv.row({format_double(center), format_double(mean)});
            }
        }
        {
            CsvWriter csv((out / "metrics" / "threshold_sweep.csv").string());
            csv.row({"confidence_threshold (cosine)", "novelty_accuracy (fraction)"});
            for (const auto& [tau, acc] : threshold_sweep) {
                csv.row({format_double(tau), format_double(acc)});
            }
        }
        {
            CsvWriter csv((out / "metrics" / "latency_summary.csv").string());
            csv.row({"encoder_id", "mean (ms)", "population_std (ms)", "cv (ratio)",
                     "ols_slope (ms/token)", "ols_intercept (ms)", "pearson_r"});
            for (const auto& row : summary.latency) {
                csv.row({row.encoder_id, format_double(row.mean_ms), format_double(row.std_ms),
                         format_double(row.cv), format_double(row.fit.slope),
                         format_double(row.fit.intercept), format_double(row.fit.r)});
            }
        }
        {
            CsvWriter csv((out / "metrics" / "summary.csv").string());
            csv.row({"metric", "value"});
            csv.row({"seen_accuracy (fraction)", format_double(summary.seen_accuracy)});
            csv.row({"zds_auroc (probability)", format_double(summary.zds_auroc)});
            csv.row({"entropy_fit_slope (nats/round)", format_double(summary.entropy.fit.slope)});
            csv.row({"entropy_fit_intercept (nats)",
                     format_double(summary.entropy.fit.intercept)});
            csv.row({"convergence_round (index)", std::to_string(summary.convergence_round)});
            csv.row({"best_threshold (cosine)", format_double(summary.best_threshold)});
            csv.row({"best_threshold_accuracy (fraction)",
                     format_double(summary.best_threshold_accuracy)});
            csv.row({"planting_residual (absolute)", format_double(summary.planting_residual)});
            csv.row({"confidence_curve_non_increasing (bool)",
                     summary.confidence_vs_disagreement.monotone_decreasing ? "1" : "0"});
        }
        return 0;
    });

    stage("manifest", [&] {
        nlohmann::json manifest;
        manifest["config_hash"] = summary.config_digest;
        manifest["seed"] = config.seed;
        manifest["generated_at_utc"] = utc_timestamp();
        manifest["data"] = {
            {"synthetic", true},
            {"seen_concepts", data.seen_concepts},
            {"novel_concepts", data.novel_concepts},
            {"train_samples", data.train_pool.size()},
            {"test_samples", data.test_samples.size()},
        };
        manifest["headline"] = {
            {"seen_accuracy", summary.seen_accuracy},
            {"zds_auroc", summary.zds_auroc},
            {"entropy_fit_slope", summary.entropy.fit.slope},
            {"convergence_round", summary.convergence_round},
            {"final_entropy", summary.reports.back().entropy},
            {"best_threshold", summary.best_threshold},
            {"planting_residual", summary.planting_residual},
        };
        manifest["outputs"] = {"resolved.ini", "prototypes.csv", "rounds.csv", "assessments.csv",
                               "w_global.bin", "metrics/"};
        std::ofstream outfile(out / "manifest.json", std::ios::binary);
        outfile << manifest.dump(2) << '\n';
        return 0;
    });

    summary.prototypes = std::move(data.prototypes);
    return summary;
}

std::vector<DiversityPoint> diversity_sweep(const ExperimentConfig& base,
                                            const std::vector<double>& betas) {
    if (betas.size() < 2) throw std::invalid_argument("diversity_sweep: need at least 2 betas");
    std::vector<DiversityPoint> points;
    points.reserve(betas.size());
    for (double beta : betas) {
        ExperimentConfig cfg = base;
        cfg.dirichlet_beta = beta;
        const RunSummary s = run_experiment(cfg, false);
        DiversityPoint p;
        p.beta = beta;
        double mean_h = 0.0;
        for (const auto& rep : s.reports) mean_h += rep.entropy;
        p.mean_entropy = mean_h / static_cast<double>(s.reports.size());
        p.accuracy = s.seen_accuracy;
        points.push_back(p);
    }
    double sweep_mean = 0.0;
    for (const auto& p : points) sweep_mean += p.mean_entropy;
    sweep_mean /= static_cast<double>(points.size());
    for (auto& p : points) p.centered_entropy = p.mean_entropy - sweep_mean;
    return points;
}

void save_prototypes_csv(const std::string& path, const PrototypeSet& prototypes) {
    if (prototypes.empty()) throw std::invalid_argument("save_prototypes_csv: empty set");
    const auto k = prototypes.begin()->fused.values.size();
    CsvWriter csv(path);
    std::vector<std::string> header = {"concept_id", "disagreement"};
    for (Eigen::Index i = 0; i < k; ++i) header.push_back("z" + std::to_string(i));
    csv.row(header);
    for (const auto& p : prototypes) {
        std::vector<std::string> row = {p.concept_id, format_double(p.disagreement)};
        for (Eigen::Index i = 0; i < k; ++i) row.push_back(format_double(p.fused.values[i]));
        csv.row(row);
    }
}

PrototypeSet load_prototypes_csv(const std::string& path) {
    const auto rows = read_csv(path);
    if (rows.size() < 2 || rows.front().size() < 3) {
        throw std::runtime_error("load_prototypes_csv: bad file " + path);
    }
    const auto k = static_cast<Eigen::Index>(rows.front().size() - 2);
    PrototypeSet set;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (static_cast<Eigen::Index>(r.size()) != k + 2) {
            throw std::runtime_error("load_prototypes_csv: bad row in " + path);
        }
        AttackPrototype p;
        p.concept_id = r[0];
        p.disagreement = std::stod(r[1]);
        Vector z(k);
        for (Eigen::Index j = 0; j < k; ++j) z[j] = std::stod(r[static_cast<std::size_t>(j) + 2]);
        p.fused = SemanticEmbedding{std::move(z), "fused"};
        set.add(std::move(p));
    }
    return set;
}

}  // namespace fedsem
