#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fedsem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Perspective { offensive, defensive, adversarial };

std::string_view to_string(Perspective p);
Perspective perspective_from_string(std::string_view s);

// One textual description of an attack concept, written from one of the
// three perspectives. Exactly one description per (concept, perspective)
// participates in a prototype build.
struct ConceptDescription {
    std::string concept_id;
    Perspective perspective = Perspective::offensive;
    std::string text;
};

struct SemanticEmbedding {
    Vector values;
    std::string encoder_id;
};

// Stub encoder parameters: the norm targets reproduce each backend's
// published magnitude statistics, and the latency terms are calibrated so a
// uniform [20,180]-token corpus reproduces its mean/std latency.
struct EncoderProfile {
    std::string encoder_id;
    double target_norm_mean = 1.0;
    double target_norm_std = 0.0;
    double latency_slope_ms_per_token = 0.0;
    double latency_intercept_ms = 0.0;
    double latency_noise_std_ms = 0.0;
};

struct EncodeResult {
    SemanticEmbedding embedding;
    double latency_ms = 0.0;
};

// Fused semantic prototype for one attack concept: componentwise mean of the
// per-encoder member embeddings plus their pairwise disagreement.
struct AttackPrototype {
    std::string concept_id;
    SemanticEmbedding fused;
    std::vector<SemanticEmbedding> members;
    double disagreement = 0.0;
};

// Prototype collection ordered by concept_id (gives deterministic iteration
// and the lexicographic tie-break required by attribution).
class PrototypeSet {
public:
    void add(AttackPrototype proto);
    const AttackPrototype* find(std::string_view concept_id) const;
    const AttackPrototype& at(std::string_view concept_id) const;
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const std::vector<AttackPrototype>& items() const { return items_; }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    // Min/max of member disagreements, used by the normalized ZDS mode.
    std::pair<double, double> disagreement_range() const;

private:
    std::vector<AttackPrototype> items_;
};

// Whitespace-token count; drives the synthetic latency model.
int token_count(std::string_view text);

// Deterministic stub embedding: direction from a seeded hash of
// (encoder_id, text), L2 norm drawn per-text from
// Normal(target_norm_mean, target_norm_std) clamped positive. Latency is
// slope*tokens + intercept + seeded Gaussian noise, floored at zero.
EncodeResult encode(const EncoderProfile& profile, std::string_view text, int k,
                    std::uint64_t seed);

// Pluggable encoder backend. StubEncoder is the default; the remote HTTP
// backend implements the same surface (see remote_encoder.hpp).
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual const std::string& id() const = 0;
    virtual EncodeResult encode(const std::string& text, int k, std::uint64_t seed) const = 0;
};

class StubEncoder final : public Encoder {
public:
    explicit StubEncoder(EncoderProfile profile) : profile_(std::move(profile)) {}
    const std::string& id() const override { return profile_.encoder_id; }
    EncodeResult encode(const std::string& text, int k, std::uint64_t seed) const override {
        return fedsem::encode(profile_, text, k, seed);
    }
    const EncoderProfile& profile() const { return profile_; }

private:
    EncoderProfile profile_;
};

// Mean pairwise L2 distance over ordered member pairs,
// D = (1/(M(M-1))) * sum_{i != j} ||z_i - z_j||. Requires M >= 2 and equal
// dimensions.
double disagreement(const std::vector<SemanticEmbedding>& members);

// Builds the fused prototype for one concept. Descriptions must cover the
// three perspectives exactly once; encoders must be pairwise distinct. The
// fixed pairing is offensive->encoders[0], defensive->encoders[1],
// adversarial->encoders[2].
AttackPrototype build_prototype(const std::string& concept_id,
                                const std::vector<ConceptDescription>& descriptions,
                                const std::array<const Encoder*, 3>& encoders, int k,
                                std::uint64_t seed);

// Convenience overload for stub profiles.
AttackPrototype build_prototype(const std::string& concept_id,
                                const std::vector<ConceptDescription>& descriptions,
                                const std::array<EncoderProfile, 3>& profiles, int k,
                                std::uint64_t seed);

// Mean and population standard deviation of member L2 norms.
std::pair<double, double> semantic_strength(const std::vector<SemanticEmbedding>& embeddings);

// The three reference stub profiles (gpt-4o, deepseek-v3, llama-3-8b).
std::array<EncoderProfile, 3> default_profiles();

// Loads ConceptDescriptions from a directory of UTF-8 files named
// <concept_id>.<perspective>.txt. Unrelated files are ignored.
std::vector<ConceptDescription> load_descriptions(const std::string& directory);

// Deterministic filler text with exactly `tokens` whitespace-separated words.
std::string filler_text(int tokens, std::uint64_t seed);

// Deterministic three-perspective description set for a synthetic concept.
std::vector<ConceptDescription> synth_descriptions(const std::string& concept_id,
                                                   std::uint64_t seed);

}  // namespace fedsem
