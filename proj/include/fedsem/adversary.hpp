#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsem/federation.hpp"

namespace fedsem {

enum class AttackKind {
    poison_random,
    poison_signflip,
    poison_scale,
    lie_about_loss,
    dropout,
    evasion,
};

std::string_view to_string(AttackKind k);
AttackKind attack_kind_from_string(std::string_view s);

struct AttackScenario {
    AttackKind kind = AttackKind::poison_random;
    double fraction_of_clients = 0.0;  // in [0, 1]
    double magnitude = 0.0;
    std::uint64_t seed = 0;
};

struct AttackEvent {
    int t = 0;  // -1 marks inference-stage events
    int client_id = 0;
    AttackKind kind = AttackKind::poison_random;
    double magnitude = 0.0;
};

// Manipulated update per kind: poison_random adds seeded Gaussian noise of
// Frobenius norm = magnitude; poison_signflip returns -magnitude * W;
// poison_scale returns magnitude * W.
Matrix poison_update(const Matrix& W, AttackKind kind, double magnitude, std::uint64_t seed);

// Projected gradient descent on ||W x - z_benign||^2 with the iterate
// re-projected onto the L2 ball of radius `budget` around x_mal after every
// step. steps == 0 returns x_mal unchanged.
Vector craft_evasion(const Vector& x_mal, const Matrix& W, const Vector& z_benign, int steps,
                     double step_size, double budget);

// Seeded selection of ceil(fraction * N) clients (at least one whenever
// fraction > 0), fixed for the whole run.
std::vector<int> select_scenario_clients(const AttackScenario& scenario,
                                         const std::vector<int>& client_ids);

// Binds round-level attack scenarios into the federated loop: poisoned
// matrices replace the submitted update (with the loss re-evaluated on the
// manipulated matrix), lie_about_loss rescales the reported loss, dropout
// erases the report. Evasion scenarios are inference-stage and ignored here.
class ScenarioEngine {
public:
    ScenarioEngine(std::vector<AttackScenario> scenarios, std::vector<int> client_ids);

    // Mutates updates in place before server receipt; appends one AttackEvent
    // per affected client.
    void apply(int t, std::vector<ClientUpdate>& updates,
               const std::vector<LocalDataset>& clients, const PrototypeSet& prototypes);

    UpdateInterceptor interceptor(const std::vector<LocalDataset>& clients,
                                  const PrototypeSet& prototypes);

    const std::vector<AttackScenario>& scenarios() const { return scenarios_; }
    const std::vector<int>& clients_for(std::size_t scenario_index) const;
    const std::vector<AttackEvent>& events() const { return events_; }

private:
    std::vector<AttackScenario> scenarios_;
    std::vector<std::vector<int>> selected_;
    std::vector<AttackEvent> events_;
};

// attacks.csv: t,client_id,kind,magnitude
void save_attacks_csv(const std::string& path, const std::vector<AttackEvent>& events);

}  // namespace fedsem
