#include "fedsem/synth.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

#include "fedsem/remote_encoder.hpp"
#include "fedsem/rng.hpp"

namespace fedsem {

namespace {

constexpr std::uint64_t kDescriptionStream = 0xde5c;
constexpr std::uint64_t kGeneratorStream = 0x6e0;
constexpr std::uint64_t kSampleStream = 0x5a17;

Vector seeded_gaussian(Eigen::Index n, Rng& rng) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.next_normal();
    return v;
}

}  // namespace

PrototypeSet build_all_prototypes(const ExperimentConfig& config) {
    std::map<std::string, std::vector<ConceptDescription>> by_concept;
    if (!config.descriptions_dir.empty()) {
        for (auto& d : load_descriptions(config.descriptions_dir)) {
            by_concept[d.concept_id].push_back(std::move(d));
        }
        for (const auto& c : config.concepts) {
            if (!by_concept.count(c)) {
                throw std::runtime_error("no descriptions found for concept " + c + " in " +
                                         config.descriptions_dir);
            }
        }
    } else {
        const std::uint64_t base = mix_seed(config.seed, kDescriptionStream);
        for (const auto& c : config.concepts) {
            by_concept[c] = synth_descriptions(c, base);
        }
    }

    // FEDSEM_ENCODER_URL switches every encoder to the remote backend;
    // remote failures abort the build rather than degrading to stubs.
    const RemoteEncoderConfig remote = remote_config_from_env();
    std::vector<std::unique_ptr<Encoder>> encoders;
    for (const auto& profile : config.encoders) {
        if (remote.enabled()) {
            encoders.push_back(std::make_unique<RemoteEncoder>(remote, profile.encoder_id));
        } else {
            encoders.push_back(std::make_unique<StubEncoder>(profile));
        }
    }
    const std::array<const Encoder*, 3> backend = {encoders[0].get(), encoders[1].get(),
                                                   encoders[2].get()};

    PrototypeSet protos;
    for (const auto& c : config.concepts) {
        protos.add(build_prototype(c, by_concept.at(c), backend, config.embedding_dim,
                                   config.seed));
    }
    return protos;
}

SyntheticData generate_synthetic_dataset(const ExperimentConfig& config) {
    return generate_synthetic_dataset(config, build_all_prototypes(config));
}

SyntheticData generate_synthetic_dataset(const ExperimentConfig& config,
                                         PrototypeSet prototypes) {
    config.validate();
    const int num_concepts = static_cast<int>(config.concepts.size());
    if (num_concepts > std::min(config.feature_dim, config.embedding_dim)) {
        throw std::invalid_argument(
            "generate_synthetic_dataset: " + std::to_string(num_concepts) +
            " concepts exceed min(feature_dim, embedding_dim) = " +
            std::to_string(std::min(config.feature_dim, config.embedding_dim)) +
            "; exact planting needs larger dimensions");
    }

    SyntheticData data;
    data.prototypes = std::move(prototypes);
    data.seen_concepts = config.seen_concepts();
    data.novel_concepts = config.novel_concepts();

    const auto [d_lo, d_hi] = data.prototypes.disagreement_range();
    const double d_span = d_hi - d_lo;

    // Raw generators and samples, concept by concept in config order.
    const Eigen::Index d = config.feature_dim;
    std::map<std::string, Vector> generators;
    std::vector<FeatureVector> train_raw;
    std::vector<FeatureVector> test_raw;
    std::vector<bool> test_novel;

    for (const auto& concept_id : config.concepts) {
        const std::uint64_t concept_seed = mix_seed(config.seed, fnv1a(concept_id));
        Rng gen_rng(mix_seed(concept_seed, kGeneratorStream));
        generators.emplace(concept_id, seeded_gaussian(d, gen_rng));
        const Vector& g = generators.at(concept_id);

        const double d_hat =
            d_span > 0.0 ? (data.prototypes.at(concept_id).disagreement - d_lo) / d_span : 0.0;
        const double sigma = config.noise_std * (1.0 + config.noise_disagreement_coupling * d_hat);

        const bool novel = std::find(data.novel_concepts.begin(), data.novel_concepts.end(),
                                     concept_id) != data.novel_concepts.end();
        const int n = config.samples_per_concept;
        const int train_count =
            novel ? 0
                  : std::max(1, static_cast<int>(std::lround(config.train_fraction * n)));

        Rng sample_rng(mix_seed(concept_seed, kSampleStream));
        for (int i = 0; i < n; ++i) {
            FeatureVector fv;
            fv.values = g + sigma * seeded_gaussian(d, sample_rng);
            fv.label = concept_id;
            if (i < train_count) {
                train_raw.push_back(std::move(fv));
            } else {
                test_raw.push_back(std::move(fv));
                test_novel.push_back(novel);
            }
        }
    }
    if (train_raw.empty()) {
        throw std::invalid_argument("generate_synthetic_dataset: empty training split");
    }

    data.train_pool = std::move(train_raw);
    data.test_samples = std::move(test_raw);
    data.test_is_novel = std::move(test_novel);

    // Plant W*: min-norm solution of W G = Z over every concept's generator.
    Matrix G(d, num_concepts);
    Matrix Z(config.embedding_dim, num_concepts);
    for (int c = 0; c < num_concepts; ++c) {
        const auto& concept_id = config.concepts[static_cast<std::size_t>(c)];
        G.col(c) = generators.at(concept_id);
        Z.col(c) = data.prototypes.at(concept_id).fused.values;
    }
    const Matrix gram = G.transpose() * G;  // C x C, full rank for generic generators
    const Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error(
            "generate_synthetic_dataset: degenerate generators; planting failed");
    }
    data.planted = Z * llt.solve(G.transpose());
    data.planting_residual = (data.planted * G - Z).cwiseAbs().maxCoeff();
    return data;
}

std::vector<LocalDataset> partition_non_iid(const std::vector<FeatureVector>& pool,
                                            int num_clients, double beta, std::uint64_t seed) {
    if (num_clients < 1) throw std::invalid_argument("partition_non_iid: num_clients must be >= 1");
    if (beta <= 0.0) throw std::invalid_argument("partition_non_iid: beta must be > 0");
    if (pool.size() < static_cast<std::size_t>(num_clients)) {
        throw std::invalid_argument("partition_non_iid: pool smaller than client count");
    }

    // Group sample indices by label, labels in sorted order.
    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        by_label[pool[i].label.value_or("")].push_back(i);
    }

    constexpr int kMaxRetries = 100;
    Rng rng(mix_seed(seed, 0xd117));
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        std::vector<LocalDataset> clients(static_cast<std::size_t>(num_clients));
        for (int c = 0; c < num_clients; ++c) clients[static_cast<std::size_t>(c)].client_id = c;

        for (const auto& [label, indices] : by_label) {
            // Per-concept client shares from Dirichlet(beta).
            std::vector<double> weights(static_cast<std::size_t>(num_clients));
            double sum = 0.0;
            for (auto& w : weights) {
                w = rng.next_gamma(beta);
                sum += w;
            }
            if (sum <= 0.0) continue;
            std::vector<double> cumulative(weights.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < weights.size(); ++i) {
                acc += weights[i] / sum;
                cumulative[i] = acc;
            }
            cumulative.back() = 1.0;
            for (std::size_t idx : indices) {
                const double u = rng.next_unit();
                const auto pos = std::lower_bound(cumulative.begin(), cumulative.end(), u);
                const auto client = static_cast<std::size_t>(
                    std::distance(cumulative.begin(), pos));
                clients[std::min(client, weights.size() - 1)].samples.push_back(pool[idx]);
            }
        }

        const bool any_empty = std::any_of(clients.begin(), clients.end(),
                                           [](const LocalDataset& c) { return c.samples.empty(); });
        if (!any_empty) return clients;
    }
    throw std::runtime_error("partition_non_iid: could not produce non-empty clients after " +
                             std::to_string(kMaxRetries) + " attempts; increase pool or beta");
}

}  // namespace fedsem
