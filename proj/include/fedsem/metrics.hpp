#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fedsem/federation.hpp"

namespace fedsem {

// Named (t, value) series with strictly increasing t.
struct MetricSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
    void push(double t, double value);
};

struct RegressionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r = 0.0;  // Pearson correlation; 0 when y has no variance
};

// A(t) = (1/N) sum 1/||z_i - centroid||, distances clamped below at 1e-12
// before inversion (a client exactly at the centroid saturates at 1e12).
double alignment_score(const std::vector<Vector>& client_embeddings, const Vector& centroid);

// Ordinary least squares of y on x; xs must not be all equal.
RegressionFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// Population std divided by mean; mean must be nonzero.
double coefficient_of_variation(const std::vector<double>& samples);

struct EntropySeries {
    MetricSeries shift;   // H(t) - H(0)
    MetricSeries delta;   // dH(t)
    RegressionFit fit;    // OLS of shift against t
};

EntropySeries trust_entropy_series(const std::vector<RoundReport>& reports);

// Fraction of attributed concepts equal to truth.
double zero_shot_accuracy(const std::vector<std::string>& attributed,
                          const std::vector<std::string>& truth);

// Rank-based AUROC (Mann-Whitney), ties counted one half. Both classes must
// be present.
double auroc(const std::vector<double>& scores, const std::vector<bool>& is_novel);

struct BinnedCurve {
    std::vector<std::pair<double, double>> bins;  // (center, mean y), empty bins skipped
    bool monotone_decreasing = false;
};

// Equal-width bins over the x range. The monotone flag tolerates 1e-12
// relative slack so bins of identical values compare equal.
BinnedCurve binned_curve(const std::vector<double>& xs, const std::vector<double>& ys,
                         int num_bins);

void save_series_csv(const std::string& path, const MetricSeries& series,
                     const std::string& t_header, const std::string& value_header);

}  // namespace fedsem
