#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fedsem/projection.hpp"

namespace fedsem {

// Raised when a projected observation has zero norm: attribution abstains
// instead of fabricating a match.
class abstention_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Attribution {
    std::string concept_id;
    double confidence = 0.0;  // winning cosine
};

struct ZeroDayAssessment {
    std::string attributed_concept;
    double confidence = 0.0;
    double zds = 0.0;
    double disagreement_used = 0.0;
};

// Whether ZDS uses the prototype's raw disagreement or its min-max
// normalization over the prototype set.
enum class DisagreementMode { raw, min_max_normalized };

// a.b / (|a||b|), clamped to [-1, 1]. Throws abstention_error on zero-norm
// input.
double cosine_similarity(const Vector& a, const Vector& b);

// argmax of cosine over fused prototypes; ties go to the lexicographically
// smallest concept_id (the set iterates in that order).
Attribution attribute(const Vector& z_hat, const PrototypeSet& prototypes);

// ZDS = lambda * D + (1 - lambda) * (1 - confidence).
double zero_day_score(double disagreement, double confidence, double lambda);

ZeroDayAssessment assess(const Vector& x, const Matrix& W_g, const PrototypeSet& prototypes,
                         double lambda, DisagreementMode mode = DisagreementMode::raw);

struct AssessedSample {
    std::string sample_id;
    ZeroDayAssessment assessment;
    std::string true_label;  // empty when unknown
    bool is_novel = false;
};

std::vector<AssessedSample> assess_batch(const std::vector<FeatureVector>& samples,
                                         const std::vector<bool>& is_novel, const Matrix& W_g,
                                         const PrototypeSet& prototypes, double lambda,
                                         DisagreementMode mode = DisagreementMode::raw);

// assessments.csv:
// sample_id,attributed_concept,confidence,zds,true_label_if_known,is_novel_flag
void save_assessments_csv(const std::string& path, const std::vector<AssessedSample>& rows);
std::vector<AssessedSample> load_assessments_csv(const std::string& path);

}  // namespace fedsem
