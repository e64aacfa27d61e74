#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fedsem/adversary.hpp"
#include "fedsem/encoding.hpp"
#include "fedsem/federation.hpp"
#include "fedsem/inference.hpp"

namespace fedsem {

// Key-value document with named sections ([section] / key = value lines,
// '#' comments). Section and key order is preserved.
struct IniSection {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    const std::string* find(const std::string& key) const;
};

struct IniDoc {
    std::vector<IniSection> sections;

    const IniSection* find(const std::string& name) const;
    std::string serialize() const;
};

IniDoc parse_ini(const std::string& text);
IniDoc load_ini(const std::string& path);

std::vector<std::string> default_concepts();

struct ExperimentConfig {
    int feature_dim = 32;
    int embedding_dim = 64;
    std::vector<std::string> concepts = default_concepts();
    int novel_count = 2;                // last n concepts held out as novel
    int samples_per_concept = 200;
    double noise_std = 0.1;
    // Per-concept feature noise scales with the prototype's normalized
    // disagreement: std_a = noise_std * (1 + coupling * D_hat_a).
    double noise_disagreement_coupling = 2.0;
    double train_fraction = 0.8;
    double dirichlet_beta = 0.5;
    double lambda = 0.5;
    DisagreementMode zds_mode = DisagreementMode::raw;
    std::string descriptions_dir;  // optional on-disk concept texts
    int latency_samples = 2000;
    int confidence_bins = 3;
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    FederationConfig federation;
    std::array<EncoderProfile, 3> encoders = default_profiles();
    std::vector<std::pair<std::string, AttackScenario>> attacks;  // (name, scenario)

    std::vector<std::string> seen_concepts() const;
    std::vector<std::string> novel_concepts() const;

    void validate() const;
};

ExperimentConfig experiment_config_from_ini(const IniDoc& doc);
ExperimentConfig load_experiment_config(const std::string& path);

// Canonical serialization with every default materialized; also the input to
// the config hash.
std::string resolved_config_ini(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

}  // namespace fedsem
