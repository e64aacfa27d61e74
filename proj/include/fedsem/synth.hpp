#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsem/config.hpp"
#include "fedsem/projection.hpp"

namespace fedsem {

// Synthetic corpus with a planted linear structure: per concept a generator
// g_a in (already scaled) feature space that maps exactly onto the fused
// prototype under the planted matrix, plus labeled noisy samples around it.
// Features are generated directly in scaled space; the projection module's
// Standardizer is for externally supplied datasets.
struct SyntheticData {
    PrototypeSet prototypes;  // every concept, seen and novel
    std::vector<std::string> seen_concepts;
    std::vector<std::string> novel_concepts;
    std::vector<FeatureVector> train_pool;    // seen concepts only
    std::vector<FeatureVector> test_samples;  // seen holdout + all novel
    std::vector<bool> test_is_novel;
    Matrix planted;  // W* with W* g_a = z_a for every concept
    double planting_residual = 0.0;  // max |W* g_a - z_a| over concepts
};

// Builds prototypes for every configured concept from the configured
// encoders (or from descriptions_dir when set).
PrototypeSet build_all_prototypes(const ExperimentConfig& config);

SyntheticData generate_synthetic_dataset(const ExperimentConfig& config);
SyntheticData generate_synthetic_dataset(const ExperimentConfig& config,
                                         PrototypeSet prototypes);

// Dirichlet(beta) label-skew partition of the pool across clients. Every
// sample lands on exactly one client; allocations leaving a client empty are
// resampled (bounded retries).
std::vector<LocalDataset> partition_non_iid(const std::vector<FeatureVector>& pool,
                                            int num_clients, double beta, std::uint64_t seed);

}  // namespace fedsem
