#include "fedsem/inference.hpp"

#include <algorithm>
#include <cmath>

#include "fedsem/csv.hpp"

namespace fedsem {

double cosine_similarity(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: dim mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        throw abstention_error("cosine_similarity: zero-norm input, attribution abstains");
    }
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Attribution attribute(const Vector& z_hat, const PrototypeSet& prototypes) {
    if (prototypes.empty()) throw std::invalid_argument("attribute: empty prototype set");
    if (z_hat.norm() == 0.0) {
        throw abstention_error("attribute: zero projection, attribution abstains");
    }
    Attribution best;
    bool first = true;
    for (const auto& p : prototypes) {
        const double c = cosine_similarity(z_hat, p.fused.values);
        // strict > keeps the lexicographically smallest id on ties
        if (first || c > best.confidence) {
            best = Attribution{p.concept_id, c};
            first = false;
        }
    }
    return best;
}

double zero_day_score(double disagreement, double confidence, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) {
        throw std::invalid_argument("zero_day_score: lambda must be in [0, 1]");
    }
    if (disagreement < 0.0) throw std::invalid_argument("zero_day_score: negative disagreement");
    return lambda * disagreement + (1.0 - lambda) * (1.0 - confidence);
}

namespace {

double effective_disagreement(const AttackPrototype& proto, const PrototypeSet& prototypes,
                              DisagreementMode mode) {
    if (mode == DisagreementMode::raw) return proto.disagreement;
    const auto [lo, hi] = prototypes.disagreement_range();
    if (hi <= lo) return 0.0;
    return (proto.disagreement - lo) / (hi - lo);
}

}  // namespace

ZeroDayAssessment assess(const Vector& x, const Matrix& W_g, const PrototypeSet& prototypes,
                         double lambda, DisagreementMode mode) {
    const Vector z_hat = project(W_g, x);
    const Attribution attr = attribute(z_hat, prototypes);
    const AttackPrototype& proto = prototypes.at(attr.concept_id);
    const double d = effective_disagreement(proto, prototypes, mode);
    return ZeroDayAssessment{attr.concept_id, attr.confidence,
                             zero_day_score(d, attr.confidence, lambda), d};
}

std::vector<AssessedSample> assess_batch(const std::vector<FeatureVector>& samples,
                                         const std::vector<bool>& is_novel, const Matrix& W_g,
                                         const PrototypeSet& prototypes, double lambda,
                                         DisagreementMode mode) {
    if (!is_novel.empty() && is_novel.size() != samples.size()) {
        throw std::invalid_argument("assess_batch: novelty flag count mismatch");
    }
    std::vector<AssessedSample> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        AssessedSample row;
        row.sample_id = std::to_string(i);
        row.assessment = assess(samples[i].values, W_g, prototypes, lambda, mode);
        row.true_label = samples[i].label.value_or("");
        row.is_novel = is_novel.empty() ? false : static_cast<bool>(is_novel[i]);
        out.push_back(std::move(row));
    }
    return out;
}

void save_assessments_csv(const std::string& path, const std::vector<AssessedSample>& rows) {
    CsvWriter csv(path);
    csv.row({"sample_id", "attributed_concept", "confidence", "zds", "true_label_if_known",
             "is_novel_flag"});
    for (const auto& r : rows) {
        csv.row({r.sample_id, r.assessment.attributed_concept,
                 format_double(r.assessment.confidence), format_double(r.assessment.zds),
                 r.true_label, r.is_novel ? "1" : "0"});
    }
}

std::vector<AssessedSample> load_assessments_csv(const std::string& path) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows.front().size() != 6) {
        throw std::runtime_error("load_assessments_csv: bad header in " + path);
    }
    std::vector<AssessedSample> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 6) throw std::runtime_error("load_assessments_csv: bad row in " + path);
        AssessedSample s;
        s.sample_id = r[0];
        s.assessment.attributed_concept = r[1];
        s.assessment.confidence = std::stod(r[2]);
        s.assessment.zds = std::stod(r[3]);
        s.true_label = r[4];
        s.is_novel = r[5] == "1";
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace fedsem
