#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedsem/projection.hpp"

namespace fedsem {

// Per-client trust triple: instantaneous tau, exponentially smoothed u, and
// the normalized aggregation weight alpha.
struct TrustState {
    int client_id = 0;
    double tau = 0.0;
    double u = 1.0;
    double alpha = 0.0;
};

struct ClientRoundRow {
    int client_id = 0;
    double loss = 0.0;
    double tau = 0.0;
    double u = 0.0;
    double alpha = 0.0;
};

struct RoundReport {
    int t = 0;
    std::vector<ClientRoundRow> clients;  // reporting clients, ascending id
    double entropy = 0.0;
    double delta_entropy = 0.0;
    double deviation_norm = 0.0;
    std::string global_checksum;
};

enum class TrainingMode { closed_form, gradient_descent };
enum class WeightingMode { trust, uniform };

struct FederationConfig {
    int num_clients = 10;
    int rounds = 20;
    double gamma = 0.9;             // trust smoothing memory
    double epsilon = 1e-8;          // trust stabilizer
    double convergence_tol = 1e-6;  // entropy-change tolerance
    int convergence_window = 3;     // consecutive quiet rounds required
    TrainingMode training = TrainingMode::closed_form;
    WeightingMode weighting = WeightingMode::trust;
    double ridge = 1e-6;
    double learning_rate = 1e-2;
    int epochs = 200;
    bool parallel_clients = true;
    bool write_round_snapshots = false;
    std::uint64_t seed = 0;
};

// What a client sends to the server after local optimization (and what the
// adversary layer may tamper with before the server sees it).
struct ClientUpdate {
    int client_id = 0;
    Matrix W;
    double loss = 0.0;
};

// tau = 1 / (loss + epsilon). Strictly decreasing in loss.
double trust_score(double loss, double epsilon);

// u = gamma * u_prev + (1 - gamma) * tau, gamma in [0, 1).
double smooth_trust(double u_prev, double tau, double gamma);

// alpha_i = u_i / sum_j u_j; all inputs must be positive.
std::vector<double> normalize_weights(const std::vector<double>& u);

// W_g = sum alpha_i W_i accumulated in the given (ascending client) order
// with Kahan compensation per entry. Weights must sum to 1 within 1e-9.
Matrix aggregate(const std::vector<Matrix>& W_list, const std::vector<double>& alpha);

// Shannon entropy (natural log) of normalized weights; range [0, ln N].
double trust_entropy(const std::vector<double>& alpha);

// Frobenius norm of sum alpha_i (W_i - W_prev).
double aggregation_deviation(const std::vector<Matrix>& W_list, const std::vector<double>& alpha,
                             const Matrix& W_prev);

// True iff the last m entries of the entropy-change history all satisfy
// |dH| <= epsilon_H. Shorter histories are not converged.
bool check_convergence(const std::vector<double>& delta_history, double epsilon_h, int m);

// FNV-1a over the little-endian row-major serialization, as 16 hex digits.
std::string matrix_checksum(const Matrix& W);

// Binary snapshot: two u64 dims (rows, cols) then row-major little-endian
// f64 entries.
void save_matrix(const std::string& path, const Matrix& W);
Matrix load_matrix(const std::string& path);

// Called between client training and server receipt; may rewrite updates
// (poisoning, lied losses) or erase entries entirely (dropouts).
using UpdateInterceptor = std::function<void(int t, std::vector<ClientUpdate>&)>;

// In-process federated round loop. Owns the trust state and the global
// matrix; client training runs per round from the broadcast matrix, in
// parallel when configured, and results are merged in client_id order so the
// outcome is schedule-independent.
class FederatedSimulation {
public:
    FederatedSimulation(std::vector<LocalDataset> clients, const PrototypeSet& prototypes,
                        FederationConfig config, Matrix W0);

    void set_interceptor(UpdateInterceptor interceptor) { interceptor_ = std::move(interceptor); }

    RoundReport run_round();
    // Runs the configured number of rounds; stops early only if asked.
    std::vector<RoundReport> run(bool stop_on_convergence = false);

    const Matrix& global_matrix() const { return W_g_; }
    const std::vector<RoundReport>& history() const { return history_; }
    const std::vector<TrustState>& trust() const { return trust_; }
    const std::vector<LocalDataset>& clients() const { return clients_; }
    bool converged() const;
    // Index of the first report whose convergence test fires, or -1.
    int convergence_round() const;

private:
    std::vector<LocalDataset> clients_;
    const PrototypeSet& prototypes_;
    FederationConfig config_;
    Matrix W_g_;
    std::vector<TrustState> trust_;
    std::vector<RoundReport> history_;
    std::vector<double> delta_history_;
    UpdateInterceptor interceptor_;
    int next_round_ = 0;

    ClientUpdate train_client(const LocalDataset& client) const;
};

// Trust/entropy dynamics driven by a scripted loss schedule
// (losses_per_round[t][i] = loss of client i at round t); no matrices or
// training involved. Used for convergence diagnostics.
std::vector<RoundReport> run_scripted_trust(const std::vector<std::vector<double>>& losses_per_round,
                                            const FederationConfig& config);

// rounds.csv: t,client_id,loss,tau,u,alpha,H,dH,dev_norm
void save_rounds_csv(const std::string& path, const std::vector<RoundReport>& reports);
std::vector<RoundReport> load_rounds_csv(const std::string& path);

}  // namespace fedsem
