#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedsem/encoding.hpp"

namespace fedsem {

// One telemetry observation: d scaled flow/protocol/temporal statistics plus
// an optional concept label (present for training data).
struct FeatureVector {
    Vector values;
    std::optional<std::string> label;
};

struct LocalDataset {
    int client_id = 0;
    std::vector<FeatureVector> samples;
};

struct TrainResult {
    Matrix W;
    double loss = 0.0;
};

// Linear semantic projection z_hat = W x. Throws on shape mismatch or a
// non-finite result.
Vector project(const Matrix& W, const Vector& x);

// Mean squared-residual alignment loss:
// L = (1/|D|) sum ||W x - z_label||^2 over labeled samples.
double local_loss(const Matrix& W, const LocalDataset& dataset, const PrototypeSet& prototypes);

// Gradient of local_loss in W: (2/|D|) sum (W x - z) x^T.
Matrix local_loss_gradient(const Matrix& W, const LocalDataset& dataset,
                           const PrototypeSet& prototypes);

// Full-batch gradient descent on the alignment loss. epochs == 0 returns
// (W0, local_loss(W0)). Throws naming the epoch if the loss goes non-finite.
TrainResult train_local_gd(const Matrix& W0, const LocalDataset& dataset,
                           const PrototypeSet& prototypes, double learning_rate, int epochs);

// Ridge solution W = Z X^T (X X^T + ridge I)^-1 with features stacked
// columnwise in X and fused prototypes in Z. ridge == 0 requires X to have
// full row rank; otherwise the solver refuses and advises ridge > 0.
TrainResult train_local_closed_form(const LocalDataset& dataset, const PrototypeSet& prototypes,
                                    double ridge);

// Per-dimension z-score scaler fitted on training-split statistics.
class Standardizer {
public:
    void fit(const std::vector<FeatureVector>& samples);
    Vector apply(const Vector& x) const;
    void apply_in_place(std::vector<FeatureVector>& samples) const;
    const Vector& mean() const { return mean_; }
    const Vector& std_dev() const { return std_; }
    bool fitted() const { return mean_.size() > 0; }

private:
    Vector mean_;
    Vector std_;
};

// Dataset CSV: header f0,...,f{d-1},label; empty label marks unlabeled rows.
void save_dataset_csv(const std::string& path, const std::vector<FeatureVector>& samples, int d);
std::vector<FeatureVector> load_dataset_csv(const std::string& path);

}  // namespace fedsem
