#include "fedsem/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedsem/rng.hpp"

namespace fedsem {

namespace {

constexpr std::uint64_t kDirectionStream = 0xd1;
constexpr std::uint64_t kNormStream = 0x4e;
constexpr std::uint64_t kLatencyStream = 0x7a;

std::uint64_t text_stream_seed(std::string_view encoder_id, std::string_view text,
                               std::uint64_t seed, std::uint64_t purpose) {
    std::uint64_t h = fnv1a(encoder_id);
    h = fnv1a("\x1f", h);
    h = fnv1a(text, h);
    return mix_seed(mix_seed(h, seed), purpose);
}

}  // namespace

std::string_view to_string(Perspective p) {
    switch (p) {
        case Perspective::offensive: return "offensive";
        case Perspective::defensive: return "defensive";
        case Perspective::adversarial: return "adversarial";
    }
    throw std::logic_error("unreachable perspective");
}

Perspective perspective_from_string(std::string_view s) {
    if (s == "offensive") return Perspective::offensive;
    if (s == "defensive") return Perspective::defensive;
    if (s == "adversarial") return Perspective::adversarial;
    throw std::invalid_argument("unknown perspective: " + std::string(s));
}

void PrototypeSet::add(AttackPrototype proto) {
    auto pos = std::lower_bound(items_.begin(), items_.end(), proto.concept_id,
                                [](const AttackPrototype& a, const std::string& id) {
                                    return a.concept_id < id;
                                });
    if (pos != items_.end() && pos->concept_id == proto.concept_id) {
        throw std::invalid_argument("duplicate prototype for concept: " + proto.concept_id);
    }
    items_.insert(pos, std::move(proto));
}

const AttackPrototype* PrototypeSet::find(std::string_view concept_id) const {
    auto pos = std::lower_bound(items_.begin(), items_.end(), concept_id,
                                [](const AttackPrototype& a, std::string_view id) {
                                    return a.concept_id < id;
                                });
    if (pos == items_.end() || pos->concept_id != concept_id) return nullptr;
    return &*pos;
}

const AttackPrototype& PrototypeSet::at(std::string_view concept_id) const {
    const AttackPrototype* p = find(concept_id);
    if (!p) throw std::out_of_range("no prototype for concept: " + std::string(concept_id));
    return *p;
}

std::pair<double, double> PrototypeSet::disagreement_range() const {
    if (items_.empty()) throw std::invalid_argument("disagreement_range of empty prototype set");
    double lo = items_.front().disagreement;
    double hi = lo;
    for (const auto& p : items_) {
        lo = std::min(lo, p.disagreement);
        hi = std::max(hi, p.disagreement);
    }
    return {lo, hi};
}

int token_count(std::string_view text) {
    int count = 0;
    bool in_token = false;
    for (char c : text) {
        const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        if (!ws && !in_token) {
            ++count;
            in_token = true;
        } else if (ws) {
            in_token = false;
        }
    }
    return count;
}

EncodeResult encode(const EncoderProfile& profile, std::string_view text, int k,
                    std::uint64_t seed) {
    if (text.empty()) throw std::invalid_argument("encode: empty text");
    if (k < 1) throw std::invalid_argument("encode: embedding dimension must be >= 1");
    if (profile.target_norm_mean <= 0.0) {
        throw std::invalid_argument("encode: target_norm_mean must be > 0");
    }

    Rng direction_rng(text_stream_seed(profile.encoder_id, text, seed, kDirectionStream));
    Vector v(k);
    for (int i = 0; i < k; ++i) v[i] = direction_rng.next_normal();
    double norm = v.norm();
    if (norm < 1e-300) {
        v.setZero();
        v[0] = 1.0;
        norm = 1.0;
    }

    Rng norm_rng(text_stream_seed(profile.encoder_id, text, seed, kNormStream));
    double target = profile.target_norm_mean;
    if (profile.target_norm_std > 0.0) {
        target += profile.target_norm_std * norm_rng.next_normal();
    }
    target = std::max(target, 1e-12);
    v *= target / norm;

    const int tokens = token_count(text);
    double latency = profile.latency_slope_ms_per_token * tokens + profile.latency_intercept_ms;
    if (profile.latency_noise_std_ms > 0.0) {
        Rng latency_rng(text_stream_seed(profile.encoder_id, text, seed, kLatencyStream));
        latency += profile.latency_noise_std_ms * latency_rng.next_normal();
    }
    latency = std::max(latency, 0.0);

    return EncodeResult{SemanticEmbedding{std::move(v), profile.encoder_id}, latency};
}

double disagreement(const std::vector<SemanticEmbedding>& members) {
    const std::size_t m = members.size();
    if (m < 2) throw std::invalid_argument("disagreement: need at least 2 members");
    const Eigen::Index dim = members.front().values.size();
    for (const auto& e : members) {
        if (e.values.size() != dim) {
            throw std::invalid_argument("disagreement: member dimension mismatch");
        }
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            sum += 2.0 * (members[i].values - members[j].values).norm();
        }
    }
    return sum / (static_cast<double>(m) * static_cast<double>(m - 1));
}

AttackPrototype build_prototype(const std::string& concept_id,
                                const std::vector<ConceptDescription>& descriptions,
                                const std::array<const Encoder*, 3>& encoders, int k,
                                std::uint64_t seed) {
    const ConceptDescription* by_perspective[3] = {nullptr, nullptr, nullptr};
    for (const auto& d : descriptions) {
        auto& slot = by_perspective[static_cast<int>(d.perspective)];
        if (slot) {
            throw std::invalid_argument("build_prototype: duplicate " +
                                        std::string(to_string(d.perspective)) +
                                        " description for " + concept_id);
        }
        slot = &d;
    }
    for (int p = 0; p < 3; ++p) {
        if (!by_perspective[p]) {
            throw std::invalid_argument("build_prototype: missing " +
                                        std::string(to_string(static_cast<Perspective>(p))) +
                                        " description for " + concept_id);
        }
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            if (encoders[i]->id() == encoders[j]->id()) {
                throw std::invalid_argument("build_prototype: duplicate encoder_id " +
                                            encoders[i]->id());
            }
        }
    }

    AttackPrototype proto;
    proto.concept_id = concept_id;
    proto.members.reserve(3);
    for (int p = 0; p < 3; ++p) {
        proto.members.push_back(encoders[p]->encode(by_perspective[p]->text, k, seed).embedding);
    }
    Vector fused = Vector::Zero(k);
    for (const auto& m : proto.members) fused += m.values;
    fused /= 3.0;
    proto.fused = SemanticEmbedding{std::move(fused), "fused"};
    proto.disagreement = disagreement(proto.members);
    return proto;
}

AttackPrototype build_prototype(const std::string& concept_id,
                                const std::vector<ConceptDescription>& descriptions,
                                const std::array<EncoderProfile, 3>& profiles, int k,
                                std::uint64_t seed) {
    StubEncoder e0(profiles[0]);
    StubEncoder e1(profiles[1]);
    StubEncoder e2(profiles[2]);
    return build_prototype(concept_id, descriptions, {&e0, &e1, &e2}, k, seed);
}

std::pair<double, double> semantic_strength(const std::vector<SemanticEmbedding>& embeddings) {
    if (embeddings.empty()) throw std::invalid_argument("semantic_strength: empty list");
    double mean = 0.0;
    for (const auto& e : embeddings) mean += e.values.norm();
    mean /= static_cast<double>(embeddings.size());
    double var = 0.0;
    for (const auto& e : embeddings) {
        const double d = e.values.norm() - mean;
        var += d * d;
    }
    var /= static_cast<double>(embeddings.size());
    return {mean, std::sqrt(var)};
}

std::array<EncoderProfile, 3> default_profiles() {
    return {
        EncoderProfile{"gpt-4o", 1.145, 0.011, 0.30, 32.8, 11.698},
        EncoderProfile{"deepseek-v3", 1.042, 0.007, 0.25, 32.0, 15.536},
        EncoderProfile{"llama-3-8b", 1.221, 0.026, 0.40, 32.4, 15.336},
    };
}

std::vector<ConceptDescription> load_descriptions(const std::string& directory) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) {
        throw std::invalid_argument("load_descriptions: not a directory: " + directory);
    }
    std::vector<ConceptDescription> out;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        if (path.extension() != ".txt") continue;
        const std::string stem = path.stem().string();  // <concept_id>.<perspective>
        const auto dot = stem.rfind('.');
        if (dot == std::string::npos) continue;
        const std::string perspective = stem.substr(dot + 1);
        if (perspective != "offensive" && perspective != "defensive" &&
            perspective != "adversarial") {
            continue;
        }
        std::ifstream in(path);
        std::ostringstream body;
        body << in.rdbuf();
        ConceptDescription d;
        d.concept_id = stem.substr(0, dot);
        d.perspective = perspective_from_string(perspective);
        d.text = body.str();
        if (d.text.empty()) {
            throw std::runtime_error("load_descriptions: empty description file " + path.string());
        }
        out.push_back(std::move(d));
    }
    return out;
}

std::string filler_text(int tokens, std::uint64_t seed) {
    static const char* kWords[] = {
        "flow",   "packet", "burst",  "probe",  "session", "payload", "beacon", "handshake",
        "scan",   "retry",  "socket", "header", "window",  "jitter",  "octet",  "route",
        "digest", "cipher", "banner", "lease",  "query",   "segment", "offset", "ticket",
    };
    constexpr int kWordCount = static_cast<int>(sizeof(kWords) / sizeof(kWords[0]));
    Rng rng(mix_seed(seed, 0x77));
    std::string out;
    for (int i = 0; i < tokens; ++i) {
        if (i > 0) out += ' ';
        out += kWords[rng.next_u64() % kWordCount];
    }
    return out;
}

std::vector<ConceptDescription> synth_descriptions(const std::string& concept_id,
                                                   std::uint64_t seed) {
    const std::uint64_t base = mix_seed(fnv1a(concept_id), seed);
    std::vector<ConceptDescription> out;
    const std::array<std::pair<Perspective, std::string>, 3> stems = {{
        {Perspective::offensive, "attacker goals and tactics for " + concept_id + ":"},
        {Perspective::defensive, "observable network symptoms of " + concept_id + ":"},
        {Perspective::adversarial, "execution and evasion patterns of " + concept_id + ":"},
    }};
    for (int p = 0; p < 3; ++p) {
        Rng rng(mix_seed(base, static_cast<std::uint64_t>(p)));
        const int tokens = static_cast<int>(rng.next_range(20, 180));
        ConceptDescription d;
        d.concept_id = concept_id;
        d.perspective = stems[p].first;
        d.text = stems[p].second + " " + filler_text(tokens, mix_seed(base, 100 + p));
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace fedsem
