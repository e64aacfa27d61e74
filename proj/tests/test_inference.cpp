#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fedsem/inference.hpp"
#include "fedsem/rng.hpp"

using namespace fedsem;

namespace {

Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

AttackPrototype make_proto(const std::string& id, Vector fused, double disagreement = 0.0) {
    AttackPrototype p;
    p.concept_id = id;
    p.fused = SemanticEmbedding{std::move(fused), "fused"};
    p.disagreement = disagreement;
    return p;
}

}  // namespace

TEST_CASE("cosine_similarity hand values") {
    CHECK(cosine_similarity(vec({3, 4}), vec({3, 4})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine_similarity(vec({1, 0}), vec({1, 1})) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), abstention_error);
    CHECK_THROWS_AS(cosine_similarity(vec({1, 0}), vec({1, 0, 0})), std::invalid_argument);
}

TEST_CASE("cosine stays within [-1, 1] despite rounding") {
    Rng rng(12);
    for (int i = 0; i < 200; ++i) {
        Vector a(3);
        Vector b(3);
        for (int j = 0; j < 3; ++j) {
            a[j] = rng.next_normal() * 1e-8;
            b[j] = a[j] * 1e8;  // near-parallel, different scale
        }
        const double c = cosine_similarity(a, b);
        CHECK(c <= 1.0);
        CHECK(c >= -1.0);
    }
}

TEST_CASE("attribute picks the max-cosine prototype") {
    PrototypeSet protos;
    protos.add(make_proto("alpha", vec({1, 0}), 0.2));
    protos.add(make_proto("beta", vec({0, 1}), 0.4));

    SUBCASE("exact match attributes with confidence 1") {
        const auto [id, c] = attribute(vec({1, 0}), protos);
        CHECK(id == "alpha");
        CHECK(c == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("positive scaling changes nothing") {
        const auto base = attribute(vec({0.2, 0.9}), protos);
        const auto scaled = attribute(7.0 * vec({0.2, 0.9}), protos);
        CHECK(base.concept_id == scaled.concept_id);
        CHECK(base.confidence == doctest::Approx(scaled.confidence).epsilon(1e-12));
    }
    SUBCASE("symmetric tie goes to the lexicographically smaller id") {
        const auto [id, c] = attribute(vec({1, 1}), protos);
        CHECK(id == "alpha");
        CHECK(c == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    }
    SUBCASE("zero projection abstains, empty set rejected") {
        CHECK_THROWS_AS(attribute(vec({0, 0}), protos), abstention_error);
        CHECK_THROWS_AS(attribute(vec({1, 0}), PrototypeSet{}), std::invalid_argument);
    }
}

TEST_CASE("attribution is invariant to independent prototype rescaling") {
    Rng rng(77);
    PrototypeSet protos;
    PrototypeSet rescaled;
    for (int i = 0; i < 6; ++i) {
        Vector z(8);
        for (int j = 0; j < 8; ++j) z[j] = rng.next_normal();
        protos.add(make_proto("p" + std::to_string(i), z));
        rescaled.add(make_proto("p" + std::to_string(i), (0.1 + 5.0 * rng.next_unit()) * z));
    }
    for (int trial = 0; trial < 25; ++trial) {
        Vector q(8);
        for (int j = 0; j < 8; ++j) q[j] = rng.next_normal();
        const auto a = attribute(q, protos);
        const auto b = attribute(q, rescaled);
        CHECK(a.concept_id == b.concept_id);
        CHECK(a.confidence == doctest::Approx(b.confidence).epsilon(1e-9));
    }
}

TEST_CASE("zero_day_score formula") {
    CHECK(zero_day_score(0.7, 1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(zero_day_score(0.7, 0.1, 1.0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(zero_day_score(0.2, 0.9, 0.5) == doctest::Approx(0.15).epsilon(1e-12));
    CHECK_THROWS_AS(zero_day_score(0.2, 0.9, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(zero_day_score(0.2, 0.9, -0.1), std::invalid_argument);
}

TEST_CASE("zero_day_score is monotone in both arguments") {
    const double lambda = 0.4;
    const double h = 1e-6;
    for (double d : {0.0, 0.3, 1.2}) {
        for (double c : {-0.5, 0.0, 0.8}) {
            const double base = zero_day_score(d, c, lambda);
            CHECK(zero_day_score(d + h, c, lambda) >= base);
            CHECK(zero_day_score(d, c + h, lambda) <= base);
        }
    }
}

TEST_CASE("assess combines projection, attribution and ZDS") {
    PrototypeSet protos;
    protos.add(make_proto("target", vec({1, 0}), 0.0));
    protos.add(make_proto("other", vec({0, 1}), 0.3));
    const Matrix W = Matrix::Identity(2, 2);

    SUBCASE("perfect match with zero disagreement scores zero at any lambda") {
        for (double lambda : {0.0, 0.5, 1.0}) {
            const auto a = assess(vec({1, 0}), W, protos, lambda);
            CHECK(a.attributed_concept == "target");
            CHECK(a.zds == doctest::Approx(0.0).epsilon(1e-12));
        }
    }
    SUBCASE("orthogonal projection at lambda 0 scores one") {
        PrototypeSet single;
        single.add(make_proto("target", vec({1, 0}), 0.9));
        const auto a = assess(vec({0, 1}), W, single, 0.0);
        CHECK(a.confidence == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(a.zds == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("lower confidence and higher disagreement mean strictly higher risk") {
        const auto good = assess(vec({1, 0.05}), W, protos, 0.5);
        const auto bad = assess(vec({0.3, 1}), W, protos, 0.5);
        CHECK(good.attributed_concept == "target");
        CHECK(bad.attributed_concept == "other");
        CHECK(bad.confidence < good.confidence);
        CHECK(bad.disagreement_used > good.disagreement_used);
        CHECK(bad.zds > good.zds);
    }
    SUBCASE("zero projection surfaces the abstention") {
        CHECK_THROWS_AS(assess(vec({0, 0}), Matrix::Identity(2, 2), protos, 0.5),
                        abstention_error);
    }
}

TEST_CASE("ZDS bounds in raw and normalized modes") {
    Rng rng(31);
    PrototypeSet protos;
    double d_max = 0.0;
    for (int i = 0; i < 5; ++i) {
        Vector z(6);
        for (int j = 0; j < 6; ++j) z[j] = rng.next_normal();
        const double d = rng.next_unit() * 2.0;
        d_max = std::max(d_max, d);
        protos.add(make_proto("p" + std::to_string(i), z, d));
    }
    const Matrix W = Matrix::Identity(6, 6);
    const double lambda = 0.5;
    for (int trial = 0; trial < 50; ++trial) {
        Vector x(6);
        for (int j = 0; j < 6; ++j) x[j] = rng.next_normal();
        const auto raw = assess(x, W, protos, lambda, DisagreementMode::raw);
        CHECK(raw.zds >= 0.0);
        CHECK(raw.zds <= lambda * d_max + (1.0 - lambda) * 2.0 + 1e-12);
        const auto norm = assess(x, W, protos, lambda, DisagreementMode::min_max_normalized);
        CHECK(norm.disagreement_used >= 0.0);
        CHECK(norm.disagreement_used <= 1.0);
        CHECK(norm.zds <= 1.0 + 1e-12);
    }
}

TEST_CASE("assessments CSV round-trips") {
    namespace fs = std::filesystem;
    PrototypeSet protos;
    protos.add(make_proto("a", vec({1, 0}), 0.1));
    protos.add(make_proto("b", vec({0, 1}), 0.2));
    std::vector<FeatureVector> samples = {
        FeatureVector{vec({0.9, 0.1}), "a"},
        FeatureVector{vec({0.2, 0.8}), "b"},
        FeatureVector{vec({0.5, 0.5}), std::nullopt},
    };
    const auto rows =
        assess_batch(samples, {false, false, true}, Matrix::Identity(2, 2), protos, 0.5);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].assessment.attributed_concept == "a");
    CHECK(rows[2].is_novel);

    const auto path = (fs::temp_directory_path() / "fedsem_assess_test.csv").string();
    save_assessments_csv(path, rows);
    const auto loaded = load_assessments_csv(path);
    REQUIRE(loaded.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(loaded[i].assessment.attributed_concept == rows[i].assessment.attributed_concept);
        CHECK(loaded[i].assessment.confidence == rows[i].assessment.confidence);
        CHECK(loaded[i].assessment.zds == rows[i].assessment.zds);
        CHECK(loaded[i].true_label == rows[i].true_label);
        CHECK(loaded[i].is_novel == rows[i].is_novel);
    }
    fs::remove(path);
}
