#include "fedsem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedsem/csv.hpp"

namespace fedsem {

void MetricSeries::push(double t, double value) {
    if (!points.empty() && t <= points.back().first) {
        throw std::invalid_argument("MetricSeries: t must be strictly increasing");
    }
    points.emplace_back(t, value);
}

double alignment_score(const std::vector<Vector>& client_embeddings, const Vector& centroid) {
    if (client_embeddings.empty()) throw std::invalid_argument("alignment_score: no clients");
    double sum = 0.0;
    for (const auto& z : client_embeddings) {
        if (z.size() != centroid.size()) {
            throw std::invalid_argument("alignment_score: dimension mismatch");
        }
        sum += 1.0 / std::max((z - centroid).norm(), 1e-12);
    }
    return sum / static_cast<double>(client_embeddings.size());
}

RegressionFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("ols_fit: length mismatch");
    const auto n = static_cast<double>(xs.size());
    if (xs.size() < 2) throw std::invalid_argument("ols_fit: need at least 2 points");
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("ols_fit: degenerate xs (all equal)");
    RegressionFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r = syy == 0.0 ? 0.0 : sxy / std::sqrt(sxx * syy);
    return fit;
}

double coefficient_of_variation(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("coefficient_of_variation: empty input");
    const auto n = static_cast<double>(samples.size());
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    if (mean == 0.0) throw std::invalid_argument("coefficient_of_variation: zero mean");
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= n;
    return std::sqrt(var) / mean;
}

EntropySeries trust_entropy_series(const std::vector<RoundReport>& reports) {
    if (reports.size() < 2) {
        throw std::invalid_argument("trust_entropy_series: need at least 2 rounds");
    }
    EntropySeries out;
    out.shift.name = "entropy_shift";
    out.delta.name = "entropy_delta";
    const double h0 = reports.front().entropy;
    std::vector<double> ts;
    std::vector<double> shifts;
    for (const auto& rep : reports) {
        const auto t = static_cast<double>(rep.t);
        out.shift.push(t, rep.entropy - h0);
        out.delta.push(t, rep.delta_entropy);
        ts.push_back(t);
        shifts.push_back(rep.entropy - h0);
    }
    out.fit = ols_fit(ts, shifts);
    return out;
}

double zero_shot_accuracy(const std::vector<std::string>& attributed,
                          const std::vector<std::string>& truth) {
    if (attributed.size() != truth.size()) {
        throw std::invalid_argument("zero_shot_accuracy: length mismatch");
    }
    if (attributed.empty()) throw std::invalid_argument("zero_shot_accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < attributed.size(); ++i) {
        if (attributed[i] == truth[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(attributed.size());
}

double auroc(const std::vector<double>& scores, const std::vector<bool>& is_novel) {
    if (scores.size() != is_novel.size()) throw std::invalid_argument("auroc: length mismatch");
    std::size_t novel = 0;
    for (bool b : is_novel) novel += b ? 1 : 0;
    const std::size_t seen = scores.size() - novel;
    if (novel == 0 || seen == 0) throw std::invalid_argument("auroc: both classes required");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups, 1-based
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double novel_rank_sum = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (is_novel[k]) novel_rank_sum += rank[k];
    }
    const auto n1 = static_cast<double>(novel);
    const auto n2 = static_cast<double>(seen);
    const double u_stat = novel_rank_sum - n1 * (n1 + 1.0) / 2.0;
    return u_stat / (n1 * n2);
}

BinnedCurve binned_curve(const std::vector<double>& xs, const std::vector<double>& ys,
                         int num_bins) {
    if (num_bins < 2) throw std::invalid_argument("binned_curve: num_bins must be >= 2");
    if (xs.empty() || xs.size() != ys.size()) {
        throw std::invalid_argument("binned_curve: empty or mismatched input");
    }
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double width = (hi - lo) / num_bins;

    std::vector<double> sums(num_bins, 0.0);
    std::vector<std::size_t> counts(num_bins, 0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        int b = width > 0.0 ? static_cast<int>((xs[i] - lo) / width) : 0;
        b = std::clamp(b, 0, num_bins - 1);
        sums[b] += ys[i];
        counts[b] += 1;
    }

    BinnedCurve curve;
    curve.monotone_decreasing = true;
    bool have_prev = false;
    double prev_mean = 0.0;
    for (int b = 0; b < num_bins; ++b) {
        if (counts[b] == 0) continue;
        const double mean = sums[b] / static_cast<double>(counts[b]);
        curve.bins.emplace_back(lo + (b + 0.5) * width, mean);
        if (have_prev && mean > prev_mean + 1e-12 * std::max(1.0, std::abs(prev_mean))) {
            curve.monotone_decreasing = false;
        }
        prev_mean = mean;
        have_prev = true;
    }
    return curve;
}

void save_series_csv(const std::string& path, const MetricSeries& series,
                     const std::string& t_header, const std::string& value_header) {
    CsvWriter csv(path);
    csv.row({t_header, value_header});
    for (const auto& [t, v] : series.points) {
        csv.row({format_double(t), format_double(v)});
    }
}

}  // namespace fedsem
