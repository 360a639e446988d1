#include "qkdpair/adversary.hpp"

#include <stdexcept>

namespace qkd::adversary {
namespace {

Basis draw_basis(BasisPolicy policy, RandomSource& rng) {
    switch (policy) {
        case BasisPolicy::AlwaysZ: return Basis::Z;
        case BasisPolicy::AlwaysX: return Basis::X;
        case BasisPolicy::RandomZX: break;
    }
    return rng.bit() ? Basis::X : Basis::Z;
}

BasisPolicy parse_policy(std::string_view s) {
    if (s == "random") return BasisPolicy::RandomZX;
    if (s == "z") return BasisPolicy::AlwaysZ;
    if (s == "x") return BasisPolicy::AlwaysX;
    throw std::invalid_argument("unknown basis policy '" + std::string(s) + "'");
}

std::string_view policy_name(BasisPolicy p) {
    switch (p) {
        case BasisPolicy::RandomZX: return "random";
        case BasisPolicy::AlwaysZ: return "z";
        case BasisPolicy::AlwaysX: return "x";
    }
    return "?";
}

std::size_t slot(Qubit q) { return static_cast<std::size_t>(qsim::qubit_number(q) - 1); }

// Fill the raw guesses from the qubits Eve's decoder assigns to each role.
void assign_guesses(EveRecord& rec) {
    if (!rec.guessed_secure_qubit) return;
    const Qubit s = *rec.guessed_secure_qubit;
    if (const auto& m = rec.measured[slot(s)]) rec.guessed_secure_bit = m->outcome;
    if (const auto& m = rec.measured[slot(qsim::other(s))]) rec.guessed_aux_bit = m->outcome;
}

}  // namespace

EveStrategy parse_strategy(std::string_view text) {
    if (text == "none") return EveStrategy::none();
    if (text == "role-oracle") return EveStrategy::role_oracle();

    constexpr std::string_view both = "intercept-both:";
    constexpr std::string_view one = "intercept-one:";
    if (text.starts_with(both)) return EveStrategy::intercept_both(parse_policy(text.substr(both.size())));
    if (text.starts_with(one)) {
        const auto rest = text.substr(one.size());
        if (rest.size() >= 3 && (rest[0] == '1' || rest[0] == '2') && rest[1] == ':') {
            const Qubit q = rest[0] == '1' ? Qubit::First : Qubit::Second;
            return EveStrategy::intercept_one(q, parse_policy(rest.substr(2)));
        }
    }
    throw std::invalid_argument("unknown eve strategy '" + std::string(text) + "'");
}

std::string strategy_name(const EveStrategy& s) {
    switch (s.kind) {
        case EveKind::None: return "none";
        case EveKind::RoleOracle: return "role-oracle";
        case EveKind::InterceptBoth: return "intercept-both:" + std::string(policy_name(s.policy));
        case EveKind::InterceptOne:
            return "intercept-one:" + std::to_string(qsim::qubit_number(s.target)) + ":" +
                   std::string(policy_name(s.policy));
    }
    return "?";
}

std::pair<qsim::StateVec2, EveRecord> eve_intercept(const qsim::StateVec2& state, const EveStrategy& strategy,
                                                    std::optional<Qubit> role_hint, RandomSource& rng,
                                                    RoundId id) {
    qsim::require_normalized(state);
    if (needs_role_hint(strategy) && !role_hint)
        throw std::invalid_argument("role-oracle eve requires Bob's role assignment");
    if (!needs_role_hint(strategy) && role_hint)
        throw std::invalid_argument("only role-oracle eve may see Bob's role assignment");

    EveRecord rec;
    rec.round_id = id;
    qsim::StateVec2 current = state;

    auto measure_into = [&](Qubit q, Basis b) {
        const auto m = qsim::measure_qubit(current, q, b, rng);
        rec.measured[slot(q)] = EveMeasurement{b, m.outcome};
        current = m.state;
    };

    switch (strategy.kind) {
        case EveKind::None: break;
        case EveKind::InterceptBoth: {
            const Basis b1 = draw_basis(strategy.policy, rng);
            const Basis b2 = draw_basis(strategy.policy, rng);
            measure_into(Qubit::First, b1);
            measure_into(Qubit::Second, b2);
            rec.guessed_secure_qubit = rng.bit() ? Qubit::Second : Qubit::First;
            break;
        }
        case EveKind::InterceptOne:
            measure_into(strategy.target, draw_basis(strategy.policy, rng));
            rec.guessed_secure_qubit = strategy.target;
            break;
        case EveKind::RoleOracle:
            measure_into(qsim::other(*role_hint), Basis::X);
            rec.guessed_secure_qubit = *role_hint;
            break;
    }
    assign_guesses(rec);
    return {current, rec};
}

std::pair<qsim::StateVec1, EveRecord> eve_intercept(const qsim::StateVec1& state, const EveStrategy& strategy,
                                                    RandomSource& rng, RoundId id) {
    qsim::require_normalized(state);
    if (strategy.kind == EveKind::RoleOracle)
        throw std::invalid_argument("role-oracle eve is undefined for single-qubit BB84");

    EveRecord rec;
    rec.round_id = id;
    const bool intercepts = strategy.kind == EveKind::InterceptBoth ||
                            (strategy.kind == EveKind::InterceptOne && strategy.target == Qubit::First);
    if (!intercepts) return {state, rec};

    const Basis b = draw_basis(strategy.policy, rng);
    const auto m = qsim::measure(state, b, rng);
    rec.measured[0] = EveMeasurement{b, m.outcome};
    rec.guessed_secure_qubit = Qubit::First;
    rec.guessed_secure_bit = m.outcome;
    return {m.state, rec};
}

void apply_announcement(EveRecord& record, Basis announced_basis) {
    if (record.touched() && announced_basis == Basis::Z) record.guessed_aux_bit = 0;
}

void apply_bb84_announcement(EveRecord& record) {
    if (record.touched()) record.guessed_aux_bit = 0;
}

std::optional<Bit> eve_key_guess(const EveRecord& record) noexcept {
    if (!record.guessed_secure_bit || !record.guessed_aux_bit) return std::nullopt;
    return static_cast<Bit>(*record.guessed_secure_bit ^ *record.guessed_aux_bit);
}

std::pair<qsim::StateVec2, EveRecord> transit_pair(const qsim::StateVec2& state, const EveStrategy& strategy,
                                                   std::optional<Qubit> role_hint, double noise_p,
                                                   RandomSource& channel, RoundId id) {
    auto [s, rec] = eve_intercept(state, strategy, role_hint, channel, id);
    if (noise_p > 0.0) {
        s = qsim::depolarize(s, Qubit::First, noise_p, channel);
        s = qsim::depolarize(s, Qubit::Second, noise_p, channel);
    }
    return {s, rec};
}

std::pair<qsim::StateVec1, EveRecord> transit_single(const qsim::StateVec1& state, const EveStrategy& strategy,
                                                     double noise_p, RandomSource& channel, RoundId id) {
    auto [s, rec] = eve_intercept(state, strategy, channel, id);
    if (noise_p > 0.0) s = qsim::depolarize(s, noise_p, channel);
    return {s, rec};
}

}  // namespace qkd::adversary
