#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "fedsem/encoding.hpp"
#include "fedsem/rng.hpp"

using namespace fedsem;

namespace {

// Test double: fixed embedding regardless of text.
class FixedEncoder final : public Encoder {
public:
    FixedEncoder(std::string id, Vector v) : id_(std::move(id)), v_(std::move(v)) {}
    const std::string& id() const override { return id_; }
    EncodeResult encode(const std::string&, int, std::uint64_t) const override {
        return EncodeResult{SemanticEmbedding{v_, id_}, 0.0};
    }

private:
    std::string id_;
    Vector v_;
};

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

SemanticEmbedding emb(Vector v, const std::string& id = "e") {
    return SemanticEmbedding{std::move(v), id};
}

// Independent oracle: disagreement by brute-force enumeration of all
// ordered pairs.
double disagreement_brute_force(const std::vector<SemanticEmbedding>& members) {
    const std::size_t m = members.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i != j) sum += (members[i].values - members[j].values).norm();
        }
    }
    return sum / (static_cast<double>(m) * static_cast<double>(m - 1));
}

}  // namespace

TEST_CASE("token_count splits on whitespace runs") {
    CHECK(token_count("one two three") == 3);
    CHECK(token_count("  padded\t tokens \n here  ") == 3);
    CHECK(token_count("single") == 1);
    CHECK(token_count("") == 0);
}

TEST_CASE("filler_text produces the requested token count") {
    for (int n : {1, 5, 20, 180}) {
        CHECK(token_count(filler_text(n, 9)) == n);
    }
}

TEST_CASE("encode rejects empty text and zero dimension") {
    const EncoderProfile p{"enc", 1.0, 0.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(encode(p, "", 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(encode(p, "text", 0, 0), std::invalid_argument);
}

TEST_CASE("encode hits a zero-variance norm target exactly") {
    const EncoderProfile p{"enc", 1.0, 0.0, 0.0, 0.0, 0.0};
    const auto r = encode(p, "any text at all", 4, 7);
    CHECK(r.embedding.values.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("encode is deterministic, including across threads") {
    const EncoderProfile p{"enc", 1.2, 0.05, 0.5, 10.0, 2.0};
    const auto a = encode(p, "the same text", 8, 42);
    const auto b = encode(p, "the same text", 8, 42);
    REQUIRE(a.embedding.values.size() == b.embedding.values.size());
    for (int i = 0; i < 8; ++i) {
        CHECK(a.embedding.values[i] == b.embedding.values[i]);  // bit-identical
    }
    CHECK(a.latency_ms == b.latency_ms);

    std::vector<Vector> results(8);
    std::vector<std::thread> threads;
    for (auto& slot : results) {
        threads.emplace_back([&slot, &p] { slot = encode(p, "the same text", 8, 42).embedding.values; });
    }
    for (auto& t : threads) t.join();
    for (const auto& v : results) {
        for (int i = 0; i < 8; ++i) CHECK(v[i] == a.embedding.values[i]);
    }
}

TEST_CASE("encode varies with encoder, text and seed") {
    const EncoderProfile p1{"enc1", 1.0, 0.0, 0.0, 0.0, 0.0};
    const EncoderProfile p2{"enc2", 1.0, 0.0, 0.0, 0.0, 0.0};
    const auto base = encode(p1, "text a", 16, 1).embedding.values;
    CHECK((encode(p2, "text a", 16, 1).embedding.values - base).norm() > 1e-6);
    CHECK((encode(p1, "text b", 16, 1).embedding.values - base).norm() > 1e-6);
    CHECK((encode(p1, "text a", 16, 2).embedding.values - base).norm() > 1e-6);
}

TEST_CASE("stub norm statistics match the profile targets over a large corpus") {
    const auto profiles = default_profiles();
    // (profile index, target mean, target std)
    const struct {
        std::size_t idx;
        double mean;
        double std;
    } expected[] = {{0, 1.145, 0.011}, {1, 1.042, 0.007}, {2, 1.221, 0.026}};

    constexpr int n = 1500;
    std::vector<double> means(3, 0.0);
    for (const auto& [idx, mean, std_dev] : expected) {
        std::vector<SemanticEmbedding> embs;
        embs.reserve(n);
        for (int i = 0; i < n; ++i) {
            embs.push_back(
                encode(profiles[idx], "norm corpus item " + std::to_string(i), 32, 77).embedding);
        }
        const auto [m, s] = semantic_strength(embs);
        const double standard_error = std_dev / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(m - mean) < 3.0 * standard_error);
        CHECK(s == doctest::Approx(std_dev).epsilon(0.15));
        means[idx] = m;
    }
    // magnitude ordering: llama > gpt-4o > deepseek
    CHECK(means[2] > means[0]);
    CHECK(means[0] > means[1]);
}

TEST_CASE("disagreement matches hand-computed and brute-forced values") {
    SUBCASE("identical members give zero") {
        const std::vector<SemanticEmbedding> members = {emb(vec2(1, 2)), emb(vec2(1, 2)),
                                                        emb(vec2(1, 2))};
        CHECK(disagreement(members) == 0.0);
    }
    SUBCASE("single pair equals its distance") {
        const std::vector<SemanticEmbedding> members = {emb(vec2(0, 0)), emb(vec2(3, 4))};
        CHECK(disagreement(members) == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("three members, enumerated ordered pairs") {
        const std::vector<SemanticEmbedding> members = {emb(vec2(0, 0)), emb(vec2(1, 0)),
                                                        emb(vec2(0, 1))};
        const double expected = (2.0 + std::sqrt(2.0)) / 3.0;  // 1.138071...
        CHECK(disagreement(members) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(disagreement(members) ==
              doctest::Approx(disagreement_brute_force(members)).epsilon(1e-12));
    }
}

TEST_CASE("disagreement errors") {
    CHECK_THROWS_AS(disagreement({emb(vec2(1, 0))}), std::invalid_argument);
    Vector v3(3);
    v3 << 1, 2, 3;
    CHECK_THROWS_AS(disagreement({emb(vec2(1, 0)), emb(v3)}), std::invalid_argument);
}

TEST_CASE("disagreement is permutation invariant and positively homogeneous") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<SemanticEmbedding> members;
        const int m = 2 + static_cast<int>(rng.next_u64() % 4);
        for (int i = 0; i < m; ++i) {
            Vector v(5);
            for (int j = 0; j < 5; ++j) v[j] = rng.next_normal();
            members.push_back(emb(std::move(v)));
        }
        const double base = disagreement(members);

        std::vector<SemanticEmbedding> shuffled = members;
        for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
            std::swap(shuffled[i], shuffled[rng.next_u64() % (i + 1)]);
        }
        CHECK(disagreement(shuffled) == doctest::Approx(base).epsilon(1e-12));

        const double s = 0.25 + rng.next_unit() * 4.0;
        std::vector<SemanticEmbedding> scaled = members;
        for (auto& e : scaled) e.values *= s;
        CHECK(disagreement(scaled) == doctest::Approx(s * base).epsilon(1e-9));
    }
}

TEST_CASE("build_prototype fuses by componentwise mean") {
    const std::vector<ConceptDescription> descs = {
        {"c", Perspective::offensive, "off text"},
        {"c", Perspective::defensive, "def text"},
        {"c", Perspective::adversarial, "adv text"},
    };

    SUBCASE("identical members give fused = member and zero disagreement") {
        const Vector e = vec2(0.25, -0.5);  // exactly representable through the mean
        FixedEncoder a("a", e);
        FixedEncoder b("b", e);
        FixedEncoder c("c", e);
        const auto proto = build_prototype("c", descs, {&a, &b, &c}, 2, 0);
        CHECK((proto.fused.values - e).norm() == 0.0);
        CHECK(proto.disagreement == 0.0);
    }
    SUBCASE("hand-computed mean") {
        FixedEncoder a("a", vec2(1, 0));
        FixedEncoder b("b", vec2(0, 1));
        FixedEncoder c("c", vec2(1, 1));
        const auto proto = build_prototype("c", descs, {&a, &b, &c}, 2, 0);
        CHECK(proto.fused.values[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(proto.fused.values[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("disagreement of the hand-picked members") {
        FixedEncoder a("a", vec2(0, 0));
        FixedEncoder b("b", vec2(1, 0));
        FixedEncoder c("c", vec2(0, 1));
        const auto proto = build_prototype("c", descs, {&a, &b, &c}, 2, 0);
        CHECK(proto.disagreement == doctest::Approx((2.0 + std::sqrt(2.0)) / 3.0).epsilon(1e-12));
    }
    SUBCASE("missing perspective is rejected") {
        const std::vector<ConceptDescription> missing = {
            {"c", Perspective::offensive, "off"},
            {"c", Perspective::defensive, "def"},
        };
        FixedEncoder a("a", vec2(1, 0));
        FixedEncoder b("b", vec2(0, 1));
        FixedEncoder c("c", vec2(1, 1));
        CHECK_THROWS_AS(build_prototype("c", missing, {&a, &b, &c}, 2, 0),
                        std::invalid_argument);
    }
    SUBCASE("duplicate encoder_id is rejected") {
        FixedEncoder a("same", vec2(1, 0));
        FixedEncoder b("same", vec2(0, 1));
        FixedEncoder c("c", vec2(1, 1));
        CHECK_THROWS_AS(build_prototype("c", descs, {&a, &b, &c}, 2, 0), std::invalid_argument);
    }
}

TEST_CASE("built prototypes satisfy fused == mean(members) to 1e-12") {
    const auto profiles = default_profiles();
    for (int i = 0; i < 10; ++i) {
        const std::string concept_id = "concept_" + std::to_string(i);
        const auto proto =
            build_prototype(concept_id, synth_descriptions(concept_id, 5), profiles, 24, 11);
        Vector mean = Vector::Zero(24);
        for (const auto& m : proto.members) mean += m.values;
        mean /= 3.0;
        CHECK((proto.fused.values - mean).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(proto.disagreement >= 0.0);
    }
}

TEST_CASE("semantic_strength mean and population std") {
    SUBCASE("equal norms") {
        const std::vector<SemanticEmbedding> embs = {emb(vec2(2, 0)), emb(vec2(0, 2))};
        const auto [m, s] = semantic_strength(embs);
        CHECK(m == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(s == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("norms one and three") {
        const std::vector<SemanticEmbedding> embs = {emb(vec2(1, 0)), emb(vec2(3, 0))};
        const auto [m, s] = semantic_strength(embs);
        CHECK(m == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));  // population std
    }
    SUBCASE("empty list rejected") {
        CHECK_THROWS_AS(semantic_strength({}), std::invalid_argument);
    }
}

TEST_CASE("load_descriptions reads <concept>.<perspective>.txt files") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "fedsem_desc_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream out(dir / name);
        out << body;
    };
    write("port_scan.offensive.txt", "sweeps address ranges");
    write("port_scan.defensive.txt", "many rejected connections");
    write("port_scan.adversarial.txt", "slow randomized probing");
    write("notes.md", "ignored");
    write("port_scan.unknown.txt", "ignored too");

    const auto descs = load_descriptions(dir.string());
    REQUIRE(descs.size() == 3);
    for (const auto& d : descs) {
        CHECK(d.concept_id == "port_scan");
        CHECK(!d.text.empty());
    }

    write("broken.offensive.txt", "");
    CHECK_THROWS(load_descriptions(dir.string()));
    fs::remove_all(dir);
}

TEST_CASE("PrototypeSet orders by concept_id and rejects duplicates") {
    PrototypeSet set;
    AttackPrototype b;
    b.concept_id = "bravo";
    b.fused = emb(vec2(1, 0));
    AttackPrototype a;
    a.concept_id = "alpha";
    a.fused = emb(vec2(0, 1));
    set.add(b);
    set.add(a);
    CHECK(set.begin()->concept_id == "alpha");
    CHECK(set.find("bravo") != nullptr);
    CHECK(set.find("missing") == nullptr);
    CHECK_THROWS_AS(set.add(a), std::invalid_argument);
}
