#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "fedsem/experiment.hpp"
#include "fedsem/metrics.hpp"
#include "fedsem/rng.hpp"

using namespace fedsem;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.samples_per_concept = 60;
    cfg.federation.rounds = 5;
    cfg.latency_samples = 50;
    return cfg;
}

}  // namespace

TEST_CASE("INI parser handles sections, comments and errors") {
    const auto doc = parse_ini(
        "# comment\n"
        "[alpha]\n"
        "key = value with spaces\n"
        "num=3\n"
        "\n"
        "[beta.sub]\n"
        "x = 1\n");
    REQUIRE(doc.sections.size() == 2);
    CHECK(doc.sections[0].name == "alpha");
    CHECK(*doc.sections[0].find("key") == "value with spaces");
    CHECK(doc.find("beta.sub") != nullptr);

    CHECK_THROWS_AS(parse_ini("key = outside\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_ini("[broken\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_ini("[s]\nno equals sign\n"), std::invalid_argument);
}

TEST_CASE("experiment config round-trips through the resolved INI") {
    ExperimentConfig cfg;
    cfg.seed = 123;
    cfg.dirichlet_beta = 0.25;
    cfg.federation.gamma = 0.8;
    cfg.federation.weighting = WeightingMode::uniform;
    cfg.attacks.emplace_back("storm",
                             AttackScenario{AttackKind::poison_random, 0.2, 5.5, 99});
    const std::string text = resolved_config_ini(cfg);
    const ExperimentConfig parsed = experiment_config_from_ini(parse_ini(text));
    CHECK(parsed.seed == 123);
    CHECK(parsed.dirichlet_beta == 0.25);
    CHECK(parsed.federation.gamma == 0.8);
    CHECK(parsed.federation.weighting == WeightingMode::uniform);
    REQUIRE(parsed.attacks.size() == 1);
    CHECK(parsed.attacks[0].first == "storm");
    CHECK(parsed.attacks[0].second.kind == AttackKind::poison_random);
    CHECK(parsed.attacks[0].second.magnitude == 5.5);
    CHECK(resolved_config_ini(parsed) == text);
    CHECK(config_hash(parsed) == config_hash(cfg));

    ExperimentConfig other = cfg;
    other.seed = 124;
    CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("config validation rejects bad values and unknown keys") {
    CHECK_THROWS_AS(experiment_config_from_ini(parse_ini("[experiment]\nbogus = 1\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(experiment_config_from_ini(parse_ini("[mystery]\nx = 1\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(experiment_config_from_ini(parse_ini("[experiment]\nlambda = 1.5\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(experiment_config_from_ini(parse_ini("[federation]\ngamma = 1.0\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        experiment_config_from_ini(parse_ini("[experiment]\nnovel_count = 10\n")),
        std::invalid_argument);
}

TEST_CASE("zero-noise generation satisfies the planted matrix") {
    ExperimentConfig cfg = small_config();
    cfg.noise_std = 0.0;
    const SyntheticData data = generate_synthetic_dataset(cfg);
    CHECK(data.planting_residual < 1e-9);

    LocalDataset all;
    all.samples = data.train_pool;
    CHECK(local_loss(data.planted, all, data.prototypes) < 1e-18);
}

TEST_CASE("generation is deterministic per seed and rejects over-planting") {
    const ExperimentConfig cfg = small_config();
    const SyntheticData a = generate_synthetic_dataset(cfg);
    const SyntheticData b = generate_synthetic_dataset(cfg);
    REQUIRE(a.train_pool.size() == b.train_pool.size());
    for (std::size_t i = 0; i < a.train_pool.size(); ++i) {
        CHECK((a.train_pool[i].values - b.train_pool[i].values).norm() == 0.0);
    }
    CHECK(matrix_checksum(a.planted) == matrix_checksum(b.planted));

    ExperimentConfig tiny = cfg;
    tiny.feature_dim = 4;  // fewer dims than concepts
    try {
        generate_synthetic_dataset(tiny);
        FAIL("expected planting error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("larger dimensions") != std::string::npos);
    }
}

TEST_CASE("held-out concepts never reach a training partition") {
    const ExperimentConfig cfg = small_config();
    const SyntheticData data = generate_synthetic_dataset(cfg);
    const auto novel = cfg.novel_concepts();
    for (const auto& s : data.train_pool) {
        CHECK(std::find(novel.begin(), novel.end(), *s.label) == novel.end());
    }
    const auto clients =
        partition_non_iid(data.train_pool, 10, cfg.dirichlet_beta, mix_seed(cfg.seed, 0x9a27));
    for (const auto& c : clients) {
        for (const auto& s : c.samples) {
            CHECK(std::find(novel.begin(), novel.end(), *s.label) == novel.end());
        }
    }
    // every novel test sample is flagged
    for (std::size_t i = 0; i < data.test_samples.size(); ++i) {
        const bool is_novel = std::find(novel.begin(), novel.end(),
                                        *data.test_samples[i].label) != novel.end();
        CHECK(data.test_is_novel[i] == is_novel);
    }
}

TEST_CASE("partition conserves samples and keeps clients non-empty") {
    const ExperimentConfig cfg = small_config();
    const SyntheticData data = generate_synthetic_dataset(cfg);

    SUBCASE("single client receives the whole pool") {
        const auto clients = partition_non_iid(data.train_pool, 1, 0.5, 9);
        REQUIRE(clients.size() == 1);
        CHECK(clients[0].samples.size() == data.train_pool.size());
    }
    SUBCASE("sizes sum to the pool size and nobody is empty") {
        const auto clients = partition_non_iid(data.train_pool, 7, 0.5, 9);
        std::size_t total = 0;
        for (const auto& c : clients) {
            CHECK(!c.samples.empty());
            total += c.samples.size();
        }
        CHECK(total == data.train_pool.size());
    }
    SUBCASE("pool smaller than client count is rejected") {
        std::vector<FeatureVector> tiny(data.train_pool.begin(), data.train_pool.begin() + 3);
        CHECK_THROWS_AS(partition_non_iid(tiny, 5, 0.5, 9), std::invalid_argument);
    }
    SUBCASE("identical seeds partition identically") {
        const auto a = partition_non_iid(data.train_pool, 5, 0.5, 11);
        const auto b = partition_non_iid(data.train_pool, 5, 0.5, 11);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].samples.size() == b[i].samples.size());
        }
    }
}

TEST_CASE("huge beta approaches proportional allocation") {
    ExperimentConfig cfg;
    cfg.samples_per_concept = 2500;
    cfg.novel_count = 1;
    cfg.concepts = {"a", "b", "c"};
    cfg.feature_dim = 8;
    cfg.embedding_dim = 8;
    const SyntheticData data = generate_synthetic_dataset(cfg);
    const auto clients = partition_non_iid(data.train_pool, 4, 1e6, 13);

    // global class proportions: two seen concepts, half each
    for (const auto& c : clients) {
        std::size_t count_a = 0;
        for (const auto& s : c.samples) count_a += *s.label == "a" ? 1 : 0;
        const double proportion =
            static_cast<double>(count_a) / static_cast<double>(c.samples.size());
        CHECK(std::abs(proportion - 0.5) < 0.05);
    }
}

TEST_CASE("run_experiment names the failing stage") {
    ExperimentConfig cfg = small_config();
    cfg.descriptions_dir = "/nonexistent/fedsem/descriptions";
    try {
        run_experiment(cfg, false);
        FAIL("expected stage failure");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("stage prototypes") != std::string::npos);
    }
}

TEST_CASE("run summaries are reproducible and internally consistent") {
    const ExperimentConfig cfg = small_config();
    const RunSummary a = run_experiment(cfg, false);
    const RunSummary b = run_experiment(cfg, false);
    CHECK(a.seen_accuracy == b.seen_accuracy);
    CHECK(a.zds_auroc == b.zds_auroc);
    CHECK(matrix_checksum(a.global_matrix) == matrix_checksum(b.global_matrix));
    REQUIRE(a.reports.size() == cfg.federation.rounds);
    for (std::size_t t = 0; t < a.reports.size(); ++t) {
        CHECK(a.reports[t].global_checksum == b.reports[t].global_checksum);
        double alpha_sum = 0.0;
        for (const auto& c : a.reports[t].clients) alpha_sum += c.alpha;
        CHECK(std::abs(alpha_sum - 1.0) < 1e-9);
    }
    CHECK(a.assessments.size() == b.assessments.size());
    CHECK(a.alignment.points.size() == a.reports.size());
}

TEST_CASE("experiment outputs are byte-identical across runs") {
    const fs::path out_a = fs::temp_directory_path() / "fedsem_harness_run_a";
    const fs::path out_b = fs::temp_directory_path() / "fedsem_harness_run_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    ExperimentConfig cfg = small_config();
    cfg.out_dir = out_a.string();
    run_experiment(cfg, true);
    cfg.out_dir = out_b.string();
    run_experiment(cfg, true);

    std::vector<fs::path> files_a;
    for (const auto& entry : fs::recursive_directory_iterator(out_a)) {
        if (entry.is_regular_file()) files_a.push_back(fs::relative(entry.path(), out_a));
    }
    std::sort(files_a.begin(), files_a.end());
    CHECK(files_a.size() >= 15);
    for (const auto& rel : files_a) {
        if (rel.filename() == "manifest.json" || rel.filename() == "resolved.ini") continue;
        INFO("file: ", rel.string());
        CHECK(slurp(out_a / rel) == slurp(out_b / rel));
    }
    // manifests differ only in the timestamp line
    const std::string manifest_a = slurp(out_a / "manifest.json");
    CHECK(manifest_a.find("generated_at_utc") != std::string::npos);
    CHECK(manifest_a.find("config_hash") != std::string::npos);
    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("evasion scenarios perturb only the configured share of test samples") {
    ExperimentConfig cfg = small_config();
    cfg.attacks.emplace_back("evade", AttackScenario{AttackKind::evasion, 0.1, 0.5, 77});
    const RunSummary run = run_experiment(cfg, false);
    std::size_t evasion_events = 0;
    for (const auto& e : run.attack_events) {
        if (e.kind == AttackKind::evasion) {
            CHECK(e.t == -1);
            ++evasion_events;
        }
    }
    const std::size_t test_size = run.assessments.size();
    CHECK(evasion_events ==
          static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(test_size))));
}

TEST_CASE("prototypes CSV round-trips fused vectors and disagreements") {
    const ExperimentConfig cfg = small_config();
    const PrototypeSet protos = build_all_prototypes(cfg);
    const auto path = (fs::temp_directory_path() / "fedsem_protos_test.csv").string();
    save_prototypes_csv(path, protos);
    const PrototypeSet loaded = load_prototypes_csv(path);
    REQUIRE(loaded.size() == protos.size());
    for (const auto& p : protos) {
        const AttackPrototype& l = loaded.at(p.concept_id);
        CHECK(l.disagreement == p.disagreement);
        CHECK((l.fused.values - p.fused.values).norm() == 0.0);
    }
    fs::remove(path);
}

TEST_CASE("diversity sweep regresses accuracy positively on centered entropy") {
    ExperimentConfig base;
    base.samples_per_concept = 100;
    base.latency_samples = 10;
    const auto points = diversity_sweep(base, {0.1, 0.2, 0.5, 1.0, 5.0, 100.0});
    REQUIRE(points.size() == 6);
    double centered_sum = 0.0;
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : points) {
        centered_sum += p.centered_entropy;
        xs.push_back(p.centered_entropy);
        ys.push_back(p.accuracy);
    }
    CHECK(std::abs(centered_sum) < 1e-9);  // centering
    CHECK(ols_fit(xs, ys).slope >= 0.0);
}

TEST_CASE("latency corpus texts are distinct and noiseless fits recover profiles") {
    EncoderProfile profile{"probe", 1.0, 0.0, 0.37, 21.5, 0.0};
    const auto row = latency_study(profile, 400, 16, 5);
    CHECK(std::abs(row.fit.slope - 0.37) < 1e-9);
    CHECK(std::abs(row.fit.intercept - 21.5) < 1e-9);
    CHECK(row.fit.r > 0.999);
}
