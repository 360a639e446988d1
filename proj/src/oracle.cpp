#include <stdexcept>

#include "qkdpair/analysis.hpp"

namespace qkd::analysis {
namespace {

using adversary::BasisPolicy;
using adversary::EveKind;
using qsim::Pauli;
using qsim::Qubit;

// What Eve holds after measuring, before the public announcement.
struct EveBranch {
    double weight = 1.0;
    bool touched = false;
    std::optional<Bit> secure_guess;
    std::optional<Bit> aux_guess;
};

template <typename State>
struct Weighted {
    double weight;
    State state;
    EveBranch eve;
};

std::vector<std::pair<double, Basis>> basis_choices(BasisPolicy policy) {
    switch (policy) {
        case BasisPolicy::AlwaysZ: return {{1.0, Basis::Z}};
        case BasisPolicy::AlwaysX: return {{1.0, Basis::X}};
        case BasisPolicy::RandomZX: break;
    }
    return {{0.5, Basis::Z}, {0.5, Basis::X}};
}

std::vector<std::pair<double, std::optional<Pauli>>> noise_branches(double p) {
    if (p == 0.0) return {{1.0, std::nullopt}};
    const double third = p / 3.0;
    return {{1.0 - p, std::nullopt}, {third, Pauli::X}, {third, Pauli::Z}, {third, Pauli::Y}};
}

std::vector<Weighted<qsim::StateVec2>> pair_eve_branches(const qsim::StateVec2& state, const EveStrategy& eve,
                                                         Qubit bob_secure) {
    std::vector<Weighted<qsim::StateVec2>> out;
    switch (eve.kind) {
        case EveKind::None: out.push_back({1.0, state, {}}); break;

        case EveKind::InterceptBoth:
            for (auto [w1, b1] : basis_choices(eve.policy))
                for (auto [w2, b2] : basis_choices(eve.policy)) {
                    const auto d1 = qsim::measurement_distribution(state, Qubit::First, b1);
                    for (Bit o1 = 0; o1 < 2; ++o1) {
                        if (d1.probability(o1) == 0.0) continue;
                        const auto d2 = qsim::measurement_distribution(*d1.post[o1], Qubit::Second, b2);
                        for (Bit o2 = 0; o2 < 2; ++o2) {
                            if (d2.probability(o2) == 0.0) continue;
                            const double w = w1 * w2 * d1.probability(o1) * d2.probability(o2);
                            // Eve's decoder guesses which qubit Bob keeps as secure.
                            for (int guess = 1; guess <= 2; ++guess) {
                                EveBranch e;
                                e.touched = true;
                                e.secure_guess = guess == 1 ? o1 : o2;
                                e.aux_guess = guess == 1 ? o2 : o1;
                                out.push_back({w * 0.5, *d2.post[o2], e});
                            }
                        }
                    }
                }
            break;

        case EveKind::InterceptOne:
            for (auto [wb, b] : basis_choices(eve.policy)) {
                const auto d = qsim::measurement_distribution(state, eve.target, b);
                for (Bit o = 0; o < 2; ++o) {
                    if (d.probability(o) == 0.0) continue;
                    EveBranch e;
                    e.touched = true;
                    e.secure_guess = o;
                    out.push_back({wb * d.probability(o), *d.post[o], e});
                }
            }
            break;

        case EveKind::RoleOracle: {
            const auto d = qsim::measurement_distribution(state, qsim::other(bob_secure), Basis::X);
            for (Bit o = 0; o < 2; ++o) {
                if (d.probability(o) == 0.0) continue;
                EveBranch e;
                e.touched = true;
                e.aux_guess = o;
                out.push_back({d.probability(o), *d.post[o], e});
            }
            break;
        }
    }
    return out;
}

std::vector<Weighted<qsim::StateVec1>> single_eve_branches(const qsim::StateVec1& state, const EveStrategy& eve) {
    std::vector<Weighted<qsim::StateVec1>> out;
    const bool intercepts = eve.kind == EveKind::InterceptBoth ||
                            (eve.kind == EveKind::InterceptOne && eve.target == Qubit::First);
    if (!intercepts) {
        out.push_back({1.0, state, {}});
        return out;
    }
    for (auto [wb, b] : basis_choices(eve.policy)) {
        const auto d = qsim::measurement_distribution(state, b);
        for (Bit o = 0; o < 2; ++o) {
            if (d.probability(o) == 0.0) continue;
            EveBranch e;
            e.touched = true;
            e.secure_guess = o;
            out.push_back({wb * d.probability(o), *d.post[o], e});
        }
    }
    return out;
}

// Eve's guesses once the bases are public.
void record_eve(OutcomeKey& key, const EveBranch& e, bool aux_known_zero) {
    std::optional<Bit> aux = e.aux_guess;
    if (e.touched && aux_known_zero) aux = 0;
    key.eve_aux_guess = aux;
    if (e.secure_guess && aux) key.eve_key_guess = static_cast<Bit>(*e.secure_guess ^ *aux);
}

void enumerate_pair(const OracleConfig& cfg, ExactDistribution& dist) {
    const auto noise = noise_branches(cfg.noise_p);
    for (auto label : protocol::kAllLabels) {
        const Basis alice_basis = protocol::basis_of(label);
        const Bit alice_bit = protocol::key_bit_of(label);
        const auto prepared = protocol::pair_state(label);
        for (Qubit secure : {Qubit::First, Qubit::Second}) {
            for (Basis bob_basis : {Basis::Z, Basis::X}) {
                const double w_choice = 0.25 * 0.5 * 0.5;
                for (const auto& eb : pair_eve_branches(prepared, cfg.eve, secure)) {
                    for (auto [wn1, p1] : noise)
                        for (auto [wn2, p2] : noise) {
                            auto s = eb.state;
                            if (p1) s = qsim::apply_pauli(s, Qubit::First, *p1);
                            if (p2) s = qsim::apply_pauli(s, Qubit::Second, *p2);
                            const double w_pre = w_choice * eb.weight * wn1 * wn2;

                            const auto ds = qsim::measurement_distribution(s, secure, bob_basis);
                            for (Bit os = 0; os < 2; ++os) {
                                if (ds.probability(os) == 0.0) continue;
                                const auto da =
                                    qsim::measurement_distribution(*ds.post[os], qsim::other(secure), Basis::X);
                                for (Bit oa = 0; oa < 2; ++oa) {
                                    if (da.probability(oa) == 0.0) continue;
                                    OutcomeKey key;
                                    key.kept = alice_basis == bob_basis;
                                    key.alice_basis = alice_basis;
                                    key.alice_bit = alice_bit;
                                    key.bob_secure_bit = os;
                                    key.bob_aux_bit = bob_basis == Basis::X ? oa : Bit{0};
                                    key.bob_final_bit = key.bob_secure_bit ^ key.bob_aux_bit;
                                    record_eve(key, eb.eve, alice_basis == Basis::Z);
                                    dist.entries[key] += w_pre * ds.probability(os) * da.probability(oa);
                                }
                            }
                        }
                }
            }
        }
    }
}

void enumerate_bb84(const OracleConfig& cfg, ExactDistribution& dist) {
    if (cfg.eve.kind == EveKind::RoleOracle)
        throw std::invalid_argument("role-oracle eve is only defined for the pair protocol");
    const auto noise = noise_branches(cfg.noise_p);
    for (Basis alice_basis : {Basis::Z, Basis::X})
        for (Bit alice_bit = 0; alice_bit < 2; ++alice_bit) {
            const auto prepared = qsim::eigenstate(alice_basis, alice_bit);
            for (Basis bob_basis : {Basis::Z, Basis::X}) {
                const double w_choice = 0.5 * 0.5 * 0.5;
                for (const auto& eb : single_eve_branches(prepared, cfg.eve)) {
                    for (auto [wn, p] : noise) {
                        auto s = eb.state;
                        if (p) s = qsim::apply_pauli(s, *p);
                        const auto d = qsim::measurement_distribution(s, bob_basis);
                        for (Bit o = 0; o < 2; ++o) {
                            if (d.probability(o) == 0.0) continue;
                            OutcomeKey key;
                            key.kept = alice_basis == bob_basis;
                            key.alice_basis = alice_basis;
                            key.alice_bit = alice_bit;
                            key.bob_secure_bit = o;
                            key.bob_aux_bit = 0;
                            key.bob_final_bit = o;
                            record_eve(key, eb.eve, true);
                            dist.entries[key] += w_choice * eb.weight * wn * d.probability(o);
                        }
                    }
                }
            }
        }
}

}  // namespace

double ExactDistribution::total() const {
    double t = 0.0;
    for (const auto& [k, p] : entries) t += p;
    return t;
}

ExactDistribution enumerate_exact(const OracleConfig& config) {
    if (!(config.noise_p >= 0.0 && config.noise_p <= 1.0)) throw std::invalid_argument("noise_p must lie in [0, 1]");
    ExactDistribution dist;
    dist.config = config;
    if (config.protocol == ProtocolKind::Pair)
        enumerate_pair(config, dist);
    else
        enumerate_bb84(config, dist);
    return dist;
}

OracleMarginals marginals(const ExactDistribution& dist) {
    double kept = 0.0, final_err = 0.0, sifted_err = 0.0;
    double key_present = 0.0, key_wrong = 0.0, aux_present = 0.0, aux_wrong = 0.0;
    OracleMarginals m;
    for (const auto& [k, p] : dist.entries) {
        m.total_probability += p;
        if (!k.kept) continue;
        kept += p;
        if (k.alice_bit != k.bob_final_bit) final_err += p;
        if (k.alice_bit != k.bob_secure_bit) sifted_err += p;
        if (k.eve_key_guess) {
            key_present += p;
            if (*k.eve_key_guess != k.alice_bit) key_wrong += p;
        }
        if (k.eve_aux_guess) {
            aux_present += p;
            if (*k.eve_aux_guess != k.bob_aux_bit) aux_wrong += p;
        }
    }
    m.sift_rate = kept;
    if (kept > 0.0) {
        m.qber_final = final_err / kept;
        m.qber_sifted = sifted_err / kept;
        m.eve_secure_coverage = key_present / kept;
        m.eve_aux_coverage = aux_present / kept;
    }
    // Written as 1 - P(wrong) so that an impossible disagreement gives exactly 1.
    if (key_present > 0.0) m.eve_secure_agreement = 1.0 - key_wrong / key_present;
    if (aux_present > 0.0) m.eve_aux_agreement = 1.0 - aux_wrong / aux_present;
    return m;
}

nlohmann::ordered_json to_json(const OracleConfig& config, const OracleMarginals& m) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    nlohmann::ordered_json j;
    j["protocol"] = std::string(protocol_name(config.protocol));
    j["eve"] = adversary::strategy_name(config.eve);
    j["noise_p"] = config.noise_p;
    j["total_probability"] = m.total_probability;
    j["sift_rate"] = m.sift_rate;
    j["qber_final"] = m.qber_final;
    j["qber_sifted"] = m.qber_sifted;
    j["eve_secure_agreement"] = opt(m.eve_secure_agreement);
    j["eve_aux_agreement"] = opt(m.eve_aux_agreement);
    j["eve_secure_coverage"] = m.eve_secure_coverage;
    j["eve_aux_coverage"] = m.eve_aux_coverage;
    return j;
}

}  // namespace qkd::analysis
