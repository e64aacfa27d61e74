#include "fedsem/federation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <map>
#include <stdexcept>

#include "fedsem/csv.hpp"
#include "fedsem/rng.hpp"

namespace fedsem {

double trust_score(double loss, double epsilon) {
    if (loss < 0.0) throw std::invalid_argument("trust_score: negative loss");
    if (epsilon <= 0.0) throw std::invalid_argument("trust_score: epsilon must be > 0");
    return 1.0 / (loss + epsilon);
}

double smooth_trust(double u_prev, double tau, double gamma) {
    if (gamma < 0.0 || gamma >= 1.0) {
        throw std::invalid_argument("smooth_trust: gamma must be in [0, 1)");
    }
    return gamma * u_prev + (1.0 - gamma) * tau;
}

std::vector<double> normalize_weights(const std::vector<double>& u) {
    if (u.empty()) throw std::invalid_argument("normalize_weights: empty input");
    double sum = 0.0;
    for (double v : u) {
        if (!(v > 0.0)) throw std::invalid_argument("normalize_weights: non-positive entry");
        sum += v;
    }
    std::vector<double> alpha(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) alpha[i] = u[i] / sum;
    return alpha;
}

Matrix aggregate(const std::vector<Matrix>& W_list, const std::vector<double>& alpha) {
    if (W_list.empty()) throw std::invalid_argument("aggregate: no matrices");
    if (W_list.size() != alpha.size()) {
        throw std::invalid_argument("aggregate: weight/matrix count mismatch");
    }
    double weight_sum = 0.0;
    for (double a : alpha) weight_sum += a;
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw std::invalid_argument("aggregate: weights not normalized");
    }
    const Eigen::Index rows = W_list.front().rows();
    const Eigen::Index cols = W_list.front().cols();
    for (const auto& W : W_list) {
        if (W.rows() != rows || W.cols() != cols) {
            throw std::invalid_argument("aggregate: shape mismatch");
        }
    }
    Matrix sum = Matrix::Zero(rows, cols);
    Matrix comp = Matrix::Zero(rows, cols);  // Kahan compensation
    for (std::size_t i = 0; i < W_list.size(); ++i) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            for (Eigen::Index r = 0; r < rows; ++r) {
                const double y = alpha[i] * W_list[i](r, c) - comp(r, c);
                const double t = sum(r, c) + y;
                comp(r, c) = (t - sum(r, c)) - y;
                sum(r, c) = t;
            }
        }
    }
    return sum;
}

double trust_entropy(const std::vector<double>& alpha) {
    if (alpha.empty()) throw std::invalid_argument("trust_entropy: empty weights");
    double h = 0.0;
    for (double a : alpha) {
        if (!(a > 0.0)) throw std::invalid_argument("trust_entropy: non-positive weight");
        h -= a * std::log(a);
    }
    return h;
}

double aggregation_deviation(const std::vector<Matrix>& W_list, const std::vector<double>& alpha,
                             const Matrix& W_prev) {
    if (W_list.size() != alpha.size()) {
        throw std::invalid_argument("aggregation_deviation: weight/matrix count mismatch");
    }
    Matrix dev = Matrix::Zero(W_prev.rows(), W_prev.cols());
    for (std::size_t i = 0; i < W_list.size(); ++i) {
        if (W_list[i].rows() != W_prev.rows() || W_list[i].cols() != W_prev.cols()) {
            throw std::invalid_argument("aggregation_deviation: shape mismatch");
        }
        dev += alpha[i] * (W_list[i] - W_prev);
    }
    return dev.norm();
}

bool check_convergence(const std::vector<double>& delta_history, double epsilon_h, int m) {
    if (m < 1) throw std::invalid_argument("check_convergence: m must be >= 1");
    if (delta_history.size() < static_cast<std::size_t>(m)) return false;
    for (std::size_t i = delta_history.size() - static_cast<std::size_t>(m);
         i < delta_history.size(); ++i) {
        if (std::abs(delta_history[i]) > epsilon_h) return false;
    }
    return true;
}

namespace {

void append_le_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_le_double(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    append_le_u64(out, bits);
}

std::string serialize_matrix(const Matrix& W) {
    std::string bytes;
    bytes.reserve(16 + static_cast<std::size_t>(W.size()) * 8);
    append_le_u64(bytes, static_cast<std::uint64_t>(W.rows()));
    append_le_u64(bytes, static_cast<std::uint64_t>(W.cols()));
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
        for (Eigen::Index c = 0; c < W.cols(); ++c) {
            append_le_double(bytes, W(r, c));
        }
    }
    return bytes;
}

std::uint64_t read_le_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw std::runtime_error("load_matrix: truncated file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

}  // namespace

std::string matrix_checksum(const Matrix& W) {
    const std::string bytes = serialize_matrix(W);
    const std::uint64_t h = fnv1a_bytes(bytes.data(), bytes.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_matrix(const std::string& path, const Matrix& W) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_matrix: cannot open " + path);
    const std::string bytes = serialize_matrix(W);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Matrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_matrix: cannot open " + path);
    const auto rows = static_cast<Eigen::Index>(read_le_u64(in));
    const auto cols = static_cast<Eigen::Index>(read_le_u64(in));
    Matrix W(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const std::uint64_t bits = read_le_u64(in);
            double v;
            std::memcpy(&v, &bits, sizeof(v));
            W(r, c) = v;
        }
    }
    return W;
}

FederatedSimulation::FederatedSimulation(std::vector<LocalDataset> clients,
                                         const PrototypeSet& prototypes, FederationConfig config,
                                         Matrix W0)
    : clients_(std::move(clients)),
      prototypes_(prototypes),
      config_(config),
      W_g_(std::move(W0)) {
    if (clients_.empty()) throw std::invalid_argument("FederatedSimulation: no clients");
    if (static_cast<int>(clients_.size()) != config_.num_clients) {
        config_.num_clients = static_cast<int>(clients_.size());
    }
    std::sort(clients_.begin(), clients_.end(),
              [](const LocalDataset& a, const LocalDataset& b) { return a.client_id < b.client_id; });
    trust_.reserve(clients_.size());
    for (const auto& c : clients_) {
        trust_.push_back(TrustState{c.client_id, 0.0, 1.0, 0.0});  // u starts at 1
    }
}

ClientUpdate FederatedSimulation::train_client(const LocalDataset& client) const {
    TrainResult r = config_.training == TrainingMode::closed_form
                        ? train_local_closed_form(client, prototypes_, config_.ridge)
                        : train_local_gd(W_g_, client, prototypes_, config_.learning_rate,
                                         config_.epochs);
    return ClientUpdate{client.client_id, std::move(r.W), r.loss};
}

RoundReport FederatedSimulation::run_round() {
    const int t = next_round_;

    std::vector<ClientUpdate> updates(clients_.size());
    if (config_.parallel_clients && clients_.size() > 1) {
        std::vector<std::future<ClientUpdate>> futures;
        futures.reserve(clients_.size());
        for (const auto& client : clients_) {
            futures.push_back(std::async(std::launch::async,
                                         [this, &client] { return train_client(client); }));
        }
        for (std::size_t i = 0; i < futures.size(); ++i) updates[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < clients_.size(); ++i) {
            updates[i] = train_client(clients_[i]);
        }
    }

    if (interceptor_) interceptor_(t, updates);
    std::sort(updates.begin(), updates.end(),
              [](const ClientUpdate& a, const ClientUpdate& b) { return a.client_id < b.client_id; });
    if (updates.empty()) throw std::runtime_error("run_round: no client reported");

    // Trust update for reporting clients; dropped clients carry stale u.
    std::vector<double> u_values;
    u_values.reserve(updates.size());
    for (const auto& up : updates) {
        auto state = std::find_if(trust_.begin(), trust_.end(), [&](const TrustState& s) {
            return s.client_id == up.client_id;
        });
        if (state == trust_.end()) {
            throw std::runtime_error("run_round: unknown client " + std::to_string(up.client_id));
        }
        state->tau = trust_score(up.loss, config_.epsilon);
        state->u = smooth_trust(state->u, state->tau, config_.gamma);
        u_values.push_back(state->u);
    }

    std::vector<double> alpha;
    if (config_.weighting == WeightingMode::uniform) {
        alpha.assign(updates.size(), 1.0 / static_cast<double>(updates.size()));
    } else {
        alpha = normalize_weights(u_values);
    }

    RoundReport report;
    report.t = t;
    for (std::size_t i = 0; i < updates.size(); ++i) {
        auto state = std::find_if(trust_.begin(), trust_.end(), [&](const TrustState& s) {
            return s.client_id == updates[i].client_id;
        });
        state->alpha = alpha[i];
        report.clients.push_back(
            ClientRoundRow{updates[i].client_id, updates[i].loss, state->tau, state->u, alpha[i]});
    }

    std::vector<Matrix> W_list;
    W_list.reserve(updates.size());
    for (auto& up : updates) W_list.push_back(std::move(up.W));

    report.entropy = trust_entropy(alpha);
    report.delta_entropy = history_.empty() ? 0.0 : report.entropy - history_.back().entropy;
    report.deviation_norm = aggregation_deviation(W_list, alpha, W_g_);
    W_g_ = aggregate(W_list, alpha);
    report.global_checksum = matrix_checksum(W_g_);

    delta_history_.push_back(report.delta_entropy);
    history_.push_back(report);
    ++next_round_;
    return history_.back();
}

std::vector<RoundReport> FederatedSimulation::run(bool stop_on_convergence) {
    for (int t = next_round_; t < config_.rounds; ++t) {
        run_round();
        if (stop_on_convergence && converged()) break;
    }
    return history_;
}

bool FederatedSimulation::converged() const {
    return check_convergence(delta_history_, config_.convergence_tol, config_.convergence_window);
}

int FederatedSimulation::convergence_round() const {
    std::vector<double> prefix;
    prefix.reserve(delta_history_.size());
    for (std::size_t i = 0; i < delta_history_.size(); ++i) {
        prefix.push_back(delta_history_[i]);
        if (check_convergence(prefix, config_.convergence_tol, config_.convergence_window)) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

std::vector<RoundReport> run_scripted_trust(const std::vector<std::vector<double>>& losses_per_round,
                                            const FederationConfig& config) {
    std::vector<RoundReport> reports;
    if (losses_per_round.empty()) return reports;
    const std::size_t n = losses_per_round.front().size();
    std::vector<double> u(n, 1.0);
    for (std::size_t t = 0; t < losses_per_round.size(); ++t) {
        const auto& losses = losses_per_round[t];
        if (losses.size() != n) {
            throw std::invalid_argument("run_scripted_trust: ragged loss schedule");
        }
        RoundReport report;
        report.t = static_cast<int>(t);
        std::vector<double> taus(n);
        for (std::size_t i = 0; i < n; ++i) {
            taus[i] = trust_score(losses[i], config.epsilon);
            u[i] = smooth_trust(u[i], taus[i], config.gamma);
        }
        const std::vector<double> alpha = normalize_weights(u);
        for (std::size_t i = 0; i < n; ++i) {
            report.clients.push_back(
                ClientRoundRow{static_cast<int>(i), losses[i], taus[i], u[i], alpha[i]});
        }
        report.entropy = trust_entropy(alpha);
        report.delta_entropy = reports.empty() ? 0.0 : report.entropy - reports.back().entropy;
        reports.push_back(std::move(report));
    }
    return reports;
}

void save_rounds_csv(const std::string& path, const std::vector<RoundReport>& reports) {
    CsvWriter csv(path);
    csv.row({"t", "client_id", "loss", "tau", "u", "alpha", "H", "dH", "dev_norm"});
    for (const auto& rep : reports) {
        for (const auto& c : rep.clients) {
            csv.row({std::to_string(rep.t), std::to_string(c.client_id), format_double(c.loss),
                     format_double(c.tau), format_double(c.u), format_double(c.alpha),
                     format_double(rep.entropy), format_double(rep.delta_entropy),
                     format_double(rep.deviation_norm)});
        }
    }
}

std::vector<RoundReport> load_rounds_csv(const std::string& path) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows.front().size() != 9) {
        throw std::runtime_error("load_rounds_csv: bad header in " + path);
    }
    std::map<int, RoundReport> by_round;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 9) throw std::runtime_error("load_rounds_csv: bad row in " + path);
        const int t = std::stoi(r[0]);
        RoundReport& rep = by_round[t];
        rep.t = t;
        rep.clients.push_back(ClientRoundRow{std::stoi(r[1]), std::stod(r[2]), std::stod(r[3]),
                                             std::stod(r[4]), std::stod(r[5])});
        rep.entropy = std::stod(r[6]);
        rep.delta_entropy = std::stod(r[7]);
        rep.deviation_norm = std::stod(r[8]);
    }
    std::vector<RoundReport> reports;
    reports.reserve(by_round.size());
    for (auto& [t, rep] : by_round) reports.push_back(std::move(rep));
    return reports;
}

}  // namespace fedsem
