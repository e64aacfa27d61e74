#include "fedsem/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedsem/csv.hpp"
#include "fedsem/rng.hpp"

namespace fedsem {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            const std::string item = trim(cur);
            if (!item.empty()) out.push_back(item);
            cur.clear();
        } else {
            cur += c;
        }
    }
    const std::string item = trim(cur);
    if (!item.empty()) out.push_back(item);
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": " + v);
    }
}

long long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return i;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const unsigned long long i = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return i;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad unsigned integer for " + key + ": " + v);
    }
}

// Applies `fn(key, value)` for each entry; throws on keys fn rejects.
template <typename Fn>
void for_entries(const IniSection& section, Fn&& fn) {
    for (const auto& [key, value] : section.entries) {
        if (!fn(key, value)) {
            throw std::invalid_argument("config: unknown key '" + key + "' in [" + section.name +
                                        "]");
        }
    }
}

}  // namespace

const std::string* IniSection::find(const std::string& key) const {
    for (const auto& [k, v] : entries) {
        if (k == key) return &v;
    }
    return nullptr;
}

const IniSection* IniDoc::find(const std::string& name) const {
    for (const auto& s : sections) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

std::string IniDoc::serialize() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (i) out << '\n';
        out << '[' << sections[i].name << "]\n";
        for (const auto& [k, v] : sections[i].entries) {
            out << k << " = " << v << '\n';
        }
    }
    return out.str();
}

IniDoc parse_ini(const std::string& text) {
    IniDoc doc;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    IniSection* current = nullptr;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) {
                throw std::invalid_argument("config: malformed section at line " +
                                            std::to_string(lineno));
            }
            doc.sections.push_back(IniSection{trim(t.substr(1, t.size() - 2)), {}});
            current = &doc.sections.back();
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: expected key = value at line " +
                                        std::to_string(lineno));
        }
        if (!current) {
            throw std::invalid_argument("config: key outside any section at line " +
                                        std::to_string(lineno));
        }
        current->entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return doc;
}

IniDoc load_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream body;
    body << in.rdbuf();
    return parse_ini(body.str());
}

std::vector<std::string> default_concepts() {
    return {"arp_spoofing",     "botnet_c2",       "brute_force_ssh", "ddos_volumetric",
            "dns_tunneling",    "lateral_movement", "port_scan",       "ransomware_beacon",
            "sql_injection",    "data_exfiltration"};
}

std::vector<std::string> ExperimentConfig::seen_concepts() const {
    std::vector<std::string> out(concepts.begin(), concepts.end() - novel_count);
    return out;
}

std::vector<std::string> ExperimentConfig::novel_concepts() const {
    std::vector<std::string> out(concepts.end() - novel_count, concepts.end());
    return out;
}

void ExperimentConfig::validate() const {
    if (feature_dim < 1) throw std::invalid_argument("config: feature_dim must be >= 1");
    if (embedding_dim < 1) throw std::invalid_argument("config: embedding_dim must be >= 1");
    if (concepts.empty()) throw std::invalid_argument("config: concept list is empty");
    if (novel_count < 0 || novel_count >= static_cast<int>(concepts.size())) {
        throw std::invalid_argument("config: novel_count must leave at least one seen concept");
    }
    for (const auto& c : concepts) {
        if (std::count(concepts.begin(), concepts.end(), c) != 1) {
            throw std::invalid_argument("config: duplicate concept " + c);
        }
    }
    if (samples_per_concept < 2) {
        throw std::invalid_argument("config: samples_per_concept must be >= 2");
    }
    if (noise_std < 0.0) throw std::invalid_argument("config: noise_std must be >= 0");
    if (noise_disagreement_coupling < 0.0) {
        throw std::invalid_argument("config: noise_disagreement_coupling must be >= 0");
    }
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw std::invalid_argument("config: train_fraction must be in (0, 1)");
    }
    if (dirichlet_beta <= 0.0) throw std::invalid_argument("config: dirichlet_beta must be > 0");
    if (lambda < 0.0 || lambda > 1.0) {
        throw std::invalid_argument("config: lambda must be in [0, 1]");
    }
    if (latency_samples < 2) throw std::invalid_argument("config: latency_samples must be >= 2");
    if (confidence_bins < 2) throw std::invalid_argument("config: confidence_bins must be >= 2");
    if (federation.num_clients < 1) throw std::invalid_argument("config: clients must be >= 1");
    if (federation.rounds < 1) throw std::invalid_argument("config: rounds must be >= 1");
    if (federation.gamma < 0.0 || federation.gamma >= 1.0) {
        throw std::invalid_argument("config: gamma must be in [0, 1)");
    }
    if (federation.epsilon <= 0.0) throw std::invalid_argument("config: epsilon must be > 0");
    if (federation.convergence_tol <= 0.0) {
        throw std::invalid_argument("config: convergence_tol must be > 0");
    }
    if (federation.convergence_window < 1) {
        throw std::invalid_argument("config: convergence_window must be >= 1");
    }
    if (federation.ridge < 0.0) throw std::invalid_argument("config: ridge must be >= 0");
    if (federation.learning_rate <= 0.0) {
        throw std::invalid_argument("config: learning_rate must be > 0");
    }
    if (federation.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    for (const auto& e : encoders) {
        if (e.target_norm_mean <= 0.0 || e.target_norm_std < 0.0 ||
            e.latency_slope_ms_per_token < 0.0) {
            throw std::invalid_argument("config: invalid encoder profile " + e.encoder_id);
        }
    }
    for (const auto& [name, a] : attacks) {
        if (a.fraction_of_clients < 0.0 || a.fraction_of_clients > 1.0) {
            throw std::invalid_argument("config: attack " + name + " fraction outside [0, 1]");
        }
        if (a.magnitude < 0.0) {
            throw std::invalid_argument("config: attack " + name + " magnitude must be >= 0");
        }
    }
}

ExperimentConfig experiment_config_from_ini(const IniDoc& doc) {
    ExperimentConfig cfg;
    bool encoders_cleared = false;
    std::vector<EncoderProfile> encoders;
    for (const auto& section : doc.sections) {
        if (section.name == "experiment") {
            for_entries(section, [&](const std::string& k, const std::string& v) {
                if (k == "feature_dim") cfg.feature_dim = static_cast<int>(parse_int(v, k));
                else if (k == "embedding_dim") cfg.embedding_dim = static_cast<int>(parse_int(v, k));
                else if (k == "concepts") cfg.concepts = split_list(v);
                else if (k == "novel_count") cfg.novel_count = static_cast<int>(parse_int(v, k));
                else if (k == "samples_per_concept") cfg.samples_per_concept = static_cast<int>(parse_int(v, k));
                else if (k == "noise_std") cfg.noise_std = parse_double(v, k);
                else if (k == "noise_disagreement_coupling") cfg.noise_disagreement_coupling = parse_double(v, k);
                else if (k == "train_fraction") cfg.train_fraction = parse_double(v, k);
                else if (k == "dirichlet_beta") cfg.dirichlet_beta = parse_double(v, k);
                else if (k == "lambda") cfg.lambda = parse_double(v, k);
                else if (k == "zds_mode") {
                    if (v == "raw") cfg.zds_mode = DisagreementMode::raw;
                    else if (v == "min_max_normalized") cfg.zds_mode = DisagreementMode::min_max_normalized;
                    else throw std::invalid_argument("config: zds_mode must be raw or min_max_normalized");
                }
                else if (k == "descriptions_dir") cfg.descriptions_dir = v;
                else if (k == "latency_samples") cfg.latency_samples = static_cast<int>(parse_int(v, k));
                else if (k == "confidence_bins") cfg.confidence_bins = static_cast<int>(parse_int(v, k));
                else if (k == "out_dir") cfg.out_dir = v;
                else if (k == "seed") cfg.seed = parse_u64(v, k);
                else return false;
                return true;
            });
        } else if (section.name == "federation") {
            for_entries(section, [&](const std::string& k, const std::string& v) {
                auto& f = cfg.federation;
                if (k == "clients") f.num_clients = static_cast<int>(parse_int(v, k));
                else if (k == "rounds") f.rounds = static_cast<int>(parse_int(v, k));
                else if (k == "gamma") f.gamma = parse_double(v, k);
                else if (k == "epsilon") f.epsilon = parse_double(v, k);
                else if (k == "convergence_tol") f.convergence_tol = parse_double(v, k);
                else if (k == "convergence_window") f.convergence_window = static_cast<int>(parse_int(v, k));
                else if (k == "training") {
                    if (v == "closed_form") f.training = TrainingMode::closed_form;
                    else if (v == "gradient_descent") f.training = TrainingMode::gradient_descent;
                    else throw std::invalid_argument("config: training must be closed_form or gradient_descent");
                }
                else if (k == "weighting") {
                    if (v == "trust") f.weighting = WeightingMode::trust;
                    else if (v == "uniform") f.weighting = WeightingMode::uniform;
                    else throw std::invalid_argument("config: weighting must be trust or uniform");
                }
                else if (k == "ridge") f.ridge = parse_double(v, k);
                else if (k == "learning_rate") f.learning_rate = parse_double(v, k);
                else if (k == "epochs") f.epochs = static_cast<int>(parse_int(v, k));
                else if (k == "parallel_clients") f.parallel_clients = parse_bool(v, k);
                else if (k == "write_round_snapshots") f.write_round_snapshots = parse_bool(v, k);
                else return false;
                return true;
            });
        } else if (section.name.rfind("encoder.", 0) == 0) {
            EncoderProfile p;
            p.encoder_id = section.name.substr(8);
            for_entries(section, [&](const std::string& k, const std::string& v) {
                if (k == "norm_mean") p.target_norm_mean = parse_double(v, k);
                else if (k == "norm_std") p.target_norm_std = parse_double(v, k);
                else if (k == "latency_slope") p.latency_slope_ms_per_token = parse_double(v, k);
                else if (k == "latency_intercept") p.latency_intercept_ms = parse_double(v, k);
                else if (k == "latency_noise_std") p.latency_noise_std_ms = parse_double(v, k);
                else return false;
                return true;
            });
            encoders.push_back(std::move(p));
            encoders_cleared = true;
        } else if (section.name.rfind("attack.", 0) == 0) {
            AttackScenario a;
            const std::string name = section.name.substr(7);
            for_entries(section, [&](const std::string& k, const std::string& v) {
                if (k == "kind") a.kind = attack_kind_from_string(v);
                else if (k == "fraction") a.fraction_of_clients = parse_double(v, k);
                else if (k == "magnitude") a.magnitude = parse_double(v, k);
                else if (k == "seed") a.seed = parse_u64(v, k);
                else return false;
                return true;
            });
            cfg.attacks.emplace_back(name, a);
        } else {
            throw std::invalid_argument("config: unknown section [" + section.name + "]");
        }
    }
    if (encoders_cleared) {
        if (encoders.size() != 3) {
            throw std::invalid_argument("config: exactly three [encoder.*] sections are required");
        }
        for (int i = 0; i < 3; ++i) cfg.encoders[i] = encoders[static_cast<std::size_t>(i)];
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return experiment_config_from_ini(load_ini(path));
}

std::string resolved_config_ini(const ExperimentConfig& config) {
    IniDoc doc;
    IniSection exp{"experiment", {}};
    auto put = [](IniSection& s, const std::string& k, const std::string& v) {
        s.entries.emplace_back(k, v);
    };
    // out_dir is deliberately not echoed: the hash identifies the
    // experiment, not the location its outputs land in.
    put(exp, "seed", std::to_string(config.seed));
    put(exp, "feature_dim", std::to_string(config.feature_dim));
    put(exp, "embedding_dim", std::to_string(config.embedding_dim));
    {
        std::string list;
        for (std::size_t i = 0; i < config.concepts.size(); ++i) {
            if (i) list += ", ";
            list += config.concepts[i];
        }
        put(exp, "concepts", list);
    }
    put(exp, "novel_count", std::to_string(config.novel_count));
    put(exp, "samples_per_concept", std::to_string(config.samples_per_concept));
    put(exp, "noise_std", format_double(config.noise_std));
    put(exp, "noise_disagreement_coupling", format_double(config.noise_disagreement_coupling));
    put(exp, "train_fraction", format_double(config.train_fraction));
    put(exp, "dirichlet_beta", format_double(config.dirichlet_beta));
    put(exp, "lambda", format_double(config.lambda));
    put(exp, "zds_mode",
        config.zds_mode == DisagreementMode::raw ? "raw" : "min_max_normalized");
    put(exp, "descriptions_dir", config.descriptions_dir);
    put(exp, "latency_samples", std::to_string(config.latency_samples));
    put(exp, "confidence_bins", std::to_string(config.confidence_bins));
    doc.sections.push_back(std::move(exp));

    IniSection fed{"federation", {}};
    const auto& f = config.federation;
    put(fed, "clients", std::to_string(f.num_clients));
    put(fed, "rounds", std::to_string(f.rounds));
    put(fed, "gamma", format_double(f.gamma));
    put(fed, "epsilon", format_double(f.epsilon));
    put(fed, "convergence_tol", format_double(f.convergence_tol));
    put(fed, "convergence_window", std::to_string(f.convergence_window));
    put(fed, "training",
        f.training == TrainingMode::closed_form ? "closed_form" : "gradient_descent");
    put(fed, "weighting", f.weighting == WeightingMode::trust ? "trust" : "uniform");
    put(fed, "ridge", format_double(f.ridge));
    put(fed, "learning_rate", format_double(f.learning_rate));
    put(fed, "epochs", std::to_string(f.epochs));
    put(fed, "parallel_clients", f.parallel_clients ? "true" : "false");
    put(fed, "write_round_snapshots", f.write_round_snapshots ? "true" : "false");
    doc.sections.push_back(std::move(fed));

    for (const auto& e : config.encoders) {
        IniSection s{"encoder." + e.encoder_id, {}};
        put(s, "norm_mean", format_double(e.target_norm_mean));
        put(s, "norm_std", format_double(e.target_norm_std));
        put(s, "latency_slope", format_double(e.latency_slope_ms_per_token));
        put(s, "latency_intercept", format_double(e.latency_intercept_ms));
        put(s, "latency_noise_std", format_double(e.latency_noise_std_ms));
        doc.sections.push_back(std::move(s));
    }
    for (const auto& [name, a] : config.attacks) {
        IniSection s{"attack." + name, {}};
        put(s, "kind", std::string(to_string(a.kind)));
        put(s, "fraction", format_double(a.fraction_of_clients));
        put(s, "magnitude", format_double(a.magnitude));
        put(s, "seed", std::to_string(a.seed));
        doc.sections.push_back(std::move(s));
    }
    return doc.serialize();
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string text = resolved_config_ini(config);
    const std::uint64_t h = fnv1a(text);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace fedsem
