#include "fedsem/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedsem/csv.hpp"
#include "fedsem/rng.hpp"

namespace fedsem {

std::string_view to_string(AttackKind k) {
    switch (k) {
        case AttackKind::poison_random: return "poison_random";
        case AttackKind::poison_signflip: return "poison_signflip";
        case AttackKind::poison_scale: return "poison_scale";
        case AttackKind::lie_about_loss: return "lie_about_loss";
        case AttackKind::dropout: return "dropout";
        case AttackKind::evasion: return "evasion";
    }
    throw std::logic_error("unreachable attack kind");
}

AttackKind attack_kind_from_string(std::string_view s) {
    if (s == "poison_random") return AttackKind::poison_random;
    if (s == "poison_signflip") return AttackKind::poison_signflip;
    if (s == "poison_scale") return AttackKind::poison_scale;
    if (s == "lie_about_loss") return AttackKind::lie_about_loss;
    if (s == "dropout") return AttackKind::dropout;
    if (s == "evasion") return AttackKind::evasion;
    throw std::invalid_argument("unknown attack kind: " + std::string(s));
}

Matrix poison_update(const Matrix& W, AttackKind kind, double magnitude, std::uint64_t seed) {
    if (magnitude < 0.0) throw std::invalid_argument("poison_update: negative magnitude");
    switch (kind) {
        case AttackKind::poison_random: {
            if (magnitude == 0.0) return W;
            Rng rng(mix_seed(seed, 0xad));
            Matrix noise(W.rows(), W.cols());
            for (Eigen::Index r = 0; r < W.rows(); ++r) {
                for (Eigen::Index c = 0; c < W.cols(); ++c) {
                    noise(r, c) = rng.next_normal();
                }
            }
            const double norm = noise.norm();
            if (norm < 1e-300) return W;
            return W + noise * (magnitude / norm);
        }
        case AttackKind::poison_signflip:
            return -magnitude * W;
        case AttackKind::poison_scale:
            return magnitude * W;
        default:
            throw std::invalid_argument("poison_update: kind is not a matrix poison");
    }
}

Vector craft_evasion(const Vector& x_mal, const Matrix& W, const Vector& z_benign, int steps,
                     double step_size, double budget) {
    if (steps < 0) throw std::invalid_argument("craft_evasion: negative steps");
    if (budget < 0.0) throw std::invalid_argument("craft_evasion: negative budget");
    if (W.cols() != x_mal.size() || W.rows() != z_benign.size()) {
        throw std::invalid_argument("craft_evasion: shape mismatch");
    }
    Vector x = x_mal;
    for (int s = 0; s < steps; ++s) {
        const Vector grad = 2.0 * W.transpose() * (W * x - z_benign);
        x -= step_size * grad;
        if (std::isfinite(budget)) {
            const Vector delta = x - x_mal;
            const double dist = delta.norm();
            if (dist > budget) {
                x = dist > 0.0 ? Vector(x_mal + delta * (budget / dist)) : x_mal;
            }
        }
        if (!x.allFinite()) {
            throw std::runtime_error("craft_evasion: non-finite iterate at step " +
                                     std::to_string(s + 1));
        }
    }
    return x;
}

std::vector<int> select_scenario_clients(const AttackScenario& scenario,
                                         const std::vector<int>& client_ids) {
    if (scenario.fraction_of_clients < 0.0 || scenario.fraction_of_clients > 1.0) {
        throw std::invalid_argument("select_scenario_clients: fraction outside [0, 1]");
    }
    if (scenario.fraction_of_clients == 0.0 || client_ids.empty()) return {};
    const auto n = client_ids.size();
    // ceiling rule: fraction > 0 always selects at least one client
    auto count = static_cast<std::size_t>(
        std::ceil(scenario.fraction_of_clients * static_cast<double>(n)));
    count = std::clamp<std::size_t>(count, 1, n);

    std::vector<int> pool = client_ids;
    std::sort(pool.begin(), pool.end());
    Rng rng(mix_seed(scenario.seed, 0x5e1));
    for (std::size_t i = pool.size() - 1; i > 0; --i) {  // Fisher-Yates
        const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
}

ScenarioEngine::ScenarioEngine(std::vector<AttackScenario> scenarios, std::vector<int> client_ids)
    : scenarios_(std::move(scenarios)) {
    selected_.reserve(scenarios_.size());
    for (const auto& s : scenarios_) {
        selected_.push_back(select_scenario_clients(s, client_ids));
    }
}

const std::vector<int>& ScenarioEngine::clients_for(std::size_t scenario_index) const {
    return selected_.at(scenario_index);
}

void ScenarioEngine::apply(int t, std::vector<ClientUpdate>& updates,
                           const std::vector<LocalDataset>& clients,
                           const PrototypeSet& prototypes) {
    for (std::size_t si = 0; si < scenarios_.size(); ++si) {
        const AttackScenario& scenario = scenarios_[si];
        if (scenario.kind == AttackKind::evasion) continue;
        for (int client_id : selected_[si]) {
            auto it = std::find_if(updates.begin(), updates.end(), [&](const ClientUpdate& u) {
                return u.client_id == client_id;
            });
            if (it == updates.end()) continue;  // already dropped this round
            switch (scenario.kind) {
                case AttackKind::poison_random:
                case AttackKind::poison_signflip:
                case AttackKind::poison_scale: {
                    const std::uint64_t round_seed =
                        mix_seed(scenario.seed, mix_seed(static_cast<std::uint64_t>(t),
                                                         static_cast<std::uint64_t>(client_id)));
                    it->W = poison_update(it->W, scenario.kind, scenario.magnitude, round_seed);
                    // The manipulated model is what the loss channel reflects;
                    // dishonest loss reporting is lie_about_loss.
                    auto data = std::find_if(clients.begin(), clients.end(),
                                             [&](const LocalDataset& d) {
                                                 return d.client_id == client_id;
                                             });
                    if (data != clients.end()) {
                        it->loss = local_loss(it->W, *data, prototypes);
                    }
                    break;
                }
                case AttackKind::lie_about_loss:
                    it->loss *= scenario.magnitude;
                    break;
                case AttackKind::dropout:
                    updates.erase(it);
                    break;
                case AttackKind::evasion:
                    break;
            }
            events_.push_back(AttackEvent{t, client_id, scenario.kind, scenario.magnitude});
        }
    }
}

UpdateInterceptor ScenarioEngine::interceptor(const std::vector<LocalDataset>& clients,
                                              const PrototypeSet& prototypes) {
    return [this, &clients, &prototypes](int t, std::vector<ClientUpdate>& updates) {
        apply(t, updates, clients, prototypes);
    };
}

void save_attacks_csv(const std::string& path, const std::vector<AttackEvent>& events) {
    CsvWriter csv(path);
    csv.row({"t", "client_id", "kind", "magnitude"});
    for (const auto& e : events) {
        csv.row({std::to_string(e.t), std::to_string(e.client_id), std::string(to_string(e.kind)),
                 format_double(e.magnitude)});
    }
}

}  // namespace fedsem
