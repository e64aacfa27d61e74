#include "fedsem/projection.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedsem/csv.hpp"

namespace fedsem {

Vector project(const Matrix& W, const Vector& x) {
    if (W.cols() != x.size()) {
        throw std::invalid_argument("project: W has " + std::to_string(W.cols()) +
                                    " columns but x has " + std::to_string(x.size()) +
                                    " entries");
    }
    Vector z = W * x;
    if (!z.allFinite()) throw std::runtime_error("project: non-finite projection");
    return z;
}

namespace {

// Resolves each sample's fused prototype once; throws on unknown labels.
std::vector<const Vector*> resolve_targets(const LocalDataset& dataset,
                                           const PrototypeSet& prototypes) {
    if (dataset.samples.empty()) throw std::invalid_argument("empty dataset");
    std::vector<const Vector*> targets;
    targets.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        if (!s.label) throw std::invalid_argument("unlabeled sample in training dataset");
        const AttackPrototype* p = prototypes.find(*s.label);
        if (!p) throw std::invalid_argument("unknown label: " + *s.label);
        targets.push_back(&p->fused.values);
    }
    return targets;
}

}  // namespace

double local_loss(const Matrix& W, const LocalDataset& dataset, const PrototypeSet& prototypes) {
    const auto targets = resolve_targets(dataset, prototypes);
    double sum = 0.0;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        sum += (W * dataset.samples[i].values - *targets[i]).squaredNorm();
    }
    return sum / static_cast<double>(dataset.samples.size());
}

Matrix local_loss_gradient(const Matrix& W, const LocalDataset& dataset,
                           const PrototypeSet& prototypes) {
    const auto targets = resolve_targets(dataset, prototypes);
    Matrix grad = Matrix::Zero(W.rows(), W.cols());
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const Vector& x = dataset.samples[i].values;
        grad.noalias() += (W * x - *targets[i]) * x.transpose();
    }
    grad *= 2.0 / static_cast<double>(dataset.samples.size());
    return grad;
}

TrainResult train_local_gd(const Matrix& W0, const LocalDataset& dataset,
                           const PrototypeSet& prototypes, double learning_rate, int epochs) {
    if (learning_rate <= 0.0) throw std::invalid_argument("train_local_gd: learning_rate <= 0");
    if (epochs < 0) throw std::invalid_argument("train_local_gd: negative epochs");
    Matrix W = W0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        W -= learning_rate * local_loss_gradient(W, dataset, prototypes);
        if (!W.allFinite()) {
            throw std::runtime_error("train_local_gd: diverged at epoch " +
                                     std::to_string(epoch + 1));
        }
    }
    const double loss = local_loss(W, dataset, prototypes);
    if (!std::isfinite(loss)) {
        throw std::runtime_error("train_local_gd: diverged at epoch " + std::to_string(epochs));
    }
    return {std::move(W), loss};
}

TrainResult train_local_closed_form(const LocalDataset& dataset, const PrototypeSet& prototypes,
                                    double ridge) {
    if (ridge < 0.0) throw std::invalid_argument("train_local_closed_form: ridge < 0");
    const auto targets = resolve_targets(dataset, prototypes);
    const auto n = static_cast<Eigen::Index>(dataset.samples.size());
    const Eigen::Index d = dataset.samples.front().values.size();
    const Eigen::Index k = targets.front()->size();

    Matrix X(d, n);
    Matrix Z(k, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (dataset.samples[i].values.size() != d) {
            throw std::invalid_argument("train_local_closed_form: inconsistent feature dims");
        }
        X.col(i) = dataset.samples[i].values;
        Z.col(i) = *targets[i];
    }

    Matrix gram = X * X.transpose();
    if (ridge == 0.0) {
        const Eigen::FullPivLU<Matrix> lu(gram);
        if (!lu.isInvertible()) {
            throw std::runtime_error(
                "train_local_closed_form: feature matrix is rank-deficient; "
                "use ridge > 0");
        }
        Matrix W = (lu.solve(X * Z.transpose())).transpose();
        return {W, local_loss(W, dataset, prototypes)};
    }
    gram.diagonal().array() += ridge;
    const Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("train_local_closed_form: factorization failed");
    }
    Matrix W = llt.solve(X * Z.transpose()).transpose();
    return {W, local_loss(W, dataset, prototypes)};
}

void Standardizer::fit(const std::vector<FeatureVector>& samples) {
    if (samples.empty()) throw std::invalid_argument("Standardizer::fit: empty sample set");
    const Eigen::Index d = samples.front().values.size();
    mean_ = Vector::Zero(d);
    for (const auto& s : samples) {
        if (s.values.size() != d) throw std::invalid_argument("Standardizer::fit: mixed dims");
        mean_ += s.values;
    }
    mean_ /= static_cast<double>(samples.size());
    Vector var = Vector::Zero(d);
    for (const auto& s : samples) var += (s.values - mean_).cwiseAbs2();
    var /= static_cast<double>(samples.size());
    std_ = var.cwiseSqrt().cwiseMax(1e-12);
}

Vector Standardizer::apply(const Vector& x) const {
    if (!fitted()) throw std::logic_error("Standardizer::apply before fit");
    if (x.size() != mean_.size()) throw std::invalid_argument("Standardizer::apply: dim mismatch");
    return (x - mean_).cwiseQuotient(std_);
}

void Standardizer::apply_in_place(std::vector<FeatureVector>& samples) const {
    for (auto& s : samples) s.values = apply(s.values);
}

void save_dataset_csv(const std::string& path, const std::vector<FeatureVector>& samples, int d) {
    CsvWriter csv(path);
    std::vector<std::string> header;
    header.reserve(static_cast<std::size_t>(d) + 1);
    for (int i = 0; i < d; ++i) header.push_back("f" + std::to_string(i));
    header.emplace_back("label");
    csv.row(header);
    for (const auto& s : samples) {
        if (s.values.size() != d) throw std::invalid_argument("save_dataset_csv: dim mismatch");
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(d) + 1);
        for (int i = 0; i < d; ++i) row.push_back(format_double(s.values[i]));
        row.push_back(s.label.value_or(""));
        csv.row(row);
    }
}

std::vector<FeatureVector> load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_dataset_csv: empty file " + path);
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header.back() != "label") {
        throw std::runtime_error("load_dataset_csv: expected header f0,...,label in " + path);
    }
    const auto d = static_cast<Eigen::Index>(header.size() - 1);
    std::vector<FeatureVector> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (static_cast<Eigen::Index>(cells.size()) != d + 1) {
            throw std::runtime_error("load_dataset_csv: bad row width in " + path);
        }
        FeatureVector fv;
        fv.values.resize(d);
        for (Eigen::Index i = 0; i < d; ++i) fv.values[i] = std::stod(cells[i]);
        if (!fv.values.allFinite()) {
            throw std::runtime_error("load_dataset_csv: non-finite feature in " + path);
        }
        if (!cells.back().empty()) fv.label = cells.back();
        out.push_back(std::move(fv));
    }
    return out;
}

}  // namespace fedsem
