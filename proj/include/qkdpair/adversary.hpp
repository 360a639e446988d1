#pragma once

// Eavesdropper models acting on qubits in flight, plus the channel transit
// step (Eve, then depolarizing noise) shared by the in-process pipeline and
// the channel daemon.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "qkdpair/protocol.hpp"
#include "qkdpair/qsim.hpp"
#include "qkdpair/random.hpp"

namespace qkd::adversary {

using protocol::Bit;
using protocol::RoundId;
using qsim::Basis;
using qsim::Outcome;
using qsim::Qubit;

enum class EveKind : std::uint8_t { None, InterceptBoth, InterceptOne, RoleOracle };
enum class BasisPolicy : std::uint8_t { RandomZX, AlwaysZ, AlwaysX };

struct EveStrategy {
    EveKind kind = EveKind::None;
    BasisPolicy policy = BasisPolicy::RandomZX;
    Qubit target = Qubit::First;  // InterceptOne only

    static EveStrategy none() { return {}; }
    static EveStrategy intercept_both(BasisPolicy p) { return {EveKind::InterceptBoth, p, Qubit::First}; }
    static EveStrategy intercept_one(Qubit q, BasisPolicy p) { return {EveKind::InterceptOne, p, q}; }
    static EveStrategy role_oracle() { return {EveKind::RoleOracle, BasisPolicy::AlwaysX, Qubit::First}; }

    bool operator==(const EveStrategy&) const = default;
};

// Accepts "none", "intercept-both:{random,z,x}", "intercept-one:{1,2}:{random,z,x}",
// "role-oracle". Throws std::invalid_argument otherwise.
EveStrategy parse_strategy(std::string_view text);
std::string strategy_name(const EveStrategy& s);

// Role oracle is the only strategy that is told Bob's role assignment.
constexpr bool needs_role_hint(const EveStrategy& s) noexcept { return s.kind == EveKind::RoleOracle; }

struct EveMeasurement {
    Basis basis;
    Outcome outcome;

    bool operator==(const EveMeasurement&) const = default;
};

struct EveRecord {
    RoundId round_id = 0;
    // Indexed by qubit number - 1.
    std::array<std::optional<EveMeasurement>, 2> measured{};
    std::optional<Qubit> guessed_secure_qubit;
    std::optional<Bit> guessed_secure_bit;
    std::optional<Bit> guessed_aux_bit;

    bool touched() const noexcept { return measured[0] || measured[1]; }

    bool operator==(const EveRecord&) const = default;
};

// Pair protocol. role_hint is Bob's secure qubit and must be given exactly
// when the strategy needs it.
std::pair<qsim::StateVec2, EveRecord> eve_intercept(const qsim::StateVec2& state, const EveStrategy& strategy,
                                                    std::optional<Qubit> role_hint, RandomSource& rng,
                                                    RoundId id = 0);

// BB84. The single qubit is qubit 1; role-oracle is rejected.
std::pair<qsim::StateVec1, EveRecord> eve_intercept(const qsim::StateVec1& state, const EveStrategy& strategy,
                                                    RandomSource& rng, RoundId id = 0);

// Eve hears the public basis announcement. On rounds announced as Z she
// applies Bob's convention and sets the auxiliary guess to 0.
void apply_announcement(EveRecord& record, Basis announced_basis);

// BB84 analogue: the auxiliary key is identically zero.
void apply_bb84_announcement(EveRecord& record);

// Eve's guess of the final key bit: secure guess XOR auxiliary guess.
std::optional<Bit> eve_key_guess(const EveRecord& record) noexcept;

// Eve, then independent depolarization of qubit 1 and qubit 2, all drawn from
// the channel stream. Noise is skipped entirely when noise_p == 0.
std::pair<qsim::StateVec2, EveRecord> transit_pair(const qsim::StateVec2& state, const EveStrategy& strategy,
                                                   std::optional<Qubit> role_hint, double noise_p,
                                                   RandomSource& channel, RoundId id = 0);

std::pair<qsim::StateVec1, EveRecord> transit_single(const qsim::StateVec1& state, const EveStrategy& strategy,
                                                     double noise_p, RandomSource& channel, RoundId id = 0);

}  // namespace qkd::adversary
