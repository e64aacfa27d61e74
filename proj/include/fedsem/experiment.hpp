#pragma once

#include <string>
#include <vector>

#include "fedsem/adversary.hpp"
#include "fedsem/config.hpp"
#include "fedsem/inference.hpp"
#include "fedsem/metrics.hpp"
#include "fedsem/synth.hpp"

namespace fedsem {

struct LatencyStudyRow {
    std::string encoder_id;
    double mean_ms = 0.0;
    double std_ms = 0.0;
    double cv = 0.0;
    RegressionFit fit;  // latency against token count
};

// (token_count, latency_ms) pairs from encoding `n` distinct filler texts
// with token counts uniform over [20, 180].
std::vector<std::pair<double, double>> latency_corpus(const EncoderProfile& profile, int n,
                                                      int k, std::uint64_t seed);

LatencyStudyRow latency_study(const EncoderProfile& profile, int n, int k, std::uint64_t seed);

struct RunSummary {
    std::string out_dir;
    std::string config_digest;
    double seen_accuracy = 0.0;
    double zds_auroc = 0.0;
    BinnedCurve confidence_vs_disagreement;
    EntropySeries entropy;
    MetricSeries alignment;
    int convergence_round = -1;
    double best_threshold = 0.0;
    double best_threshold_accuracy = 0.0;
    double planting_residual = 0.0;
    std::vector<RoundReport> reports;
    std::vector<AssessedSample> assessments;
    std::vector<LatencyStudyRow> latency;
    std::vector<AttackEvent> attack_events;
    std::vector<std::vector<int>> scenario_clients;  // per configured attack
    Matrix global_matrix;
    PrototypeSet prototypes;
};

// Full pipeline: prototypes -> synthetic data -> non-IID partition ->
// federated rounds (with attacks) -> batch inference on the held-out split
// -> metrics -> manifest. With write_outputs the out_dir receives every CSV,
// the binary global matrix, resolved.ini and manifest.json; otherwise the
// pipeline runs in memory only. Failures carry the name of the failing
// stage.
RunSummary run_experiment(const ExperimentConfig& config, bool write_outputs = true);

// Accuracy/entropy pairs across runs that differ only in dirichlet_beta.
struct DiversityPoint {
    double beta = 0.0;
    double mean_entropy = 0.0;
    double centered_entropy = 0.0;  // mean_entropy minus the sweep average
    double accuracy = 0.0;
};

std::vector<DiversityPoint> diversity_sweep(const ExperimentConfig& base,
                                            const std::vector<double>& betas);

// prototypes.csv: concept_id,disagreement,z0..z{k-1} (fused components).
void save_prototypes_csv(const std::string& path, const PrototypeSet& prototypes);
PrototypeSet load_prototypes_csv(const std::string& path);

}  // namespace fedsem
