#pragma once

// Pure-state simulator for one and two qubits.
//
// Two-qubit amplitudes are ordered |00>, |01>, |10>, |11> with qubit 1 as the
// left (most significant) factor: index = b1 * 2 + b2.

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string_view>

#include "qkdpair/random.hpp"

namespace qkd::qsim {

using Amplitude = std::complex<double>;

inline constexpr double kNormTolerance = 1e-9;
inline constexpr double kRejectTolerance = 1e-6;
inline constexpr double kExactTolerance = 1e-12;

enum class Basis : std::uint8_t { Z, X };

constexpr char basis_char(Basis b) noexcept { return b == Basis::Z ? 'Z' : 'X'; }

// Measured bit in the chosen basis. Z: 0 -> |0>, 1 -> |1>. X: 0 -> |->, 1 -> |+>.
using Outcome = std::uint8_t;

enum class Qubit : std::uint8_t { First = 1, Second = 2 };

constexpr Qubit other(Qubit q) noexcept {
    return q == Qubit::First ? Qubit::Second : Qubit::First;
}

constexpr int qubit_number(Qubit q) noexcept { return static_cast<int>(q); }

struct StateVec1 {
    std::array<Amplitude, 2> amps{};

    double norm_squared() const noexcept;
};

struct StateVec2 {
    std::array<Amplitude, 4> amps{};

    double norm_squared() const noexcept;
};

// The eigenstate of `basis` that encodes `outcome`.
StateVec1 eigenstate(Basis basis, Outcome outcome);

StateVec1 ket0();
StateVec1 ket1();
StateVec1 ket_plus();
StateVec1 ket_minus();

StateVec2 tensor(const StateVec1& a, const StateVec1& b);

// Throws std::invalid_argument when |norm^2 - 1| exceeds kRejectTolerance.
void require_normalized(const StateVec1& s);
void require_normalized(const StateVec2& s);

struct Distribution2 {
    double p_one = 0.0;
    // Post-measurement state for outcome 0 / 1; empty when that outcome has
    // zero probability.
    std::array<std::optional<StateVec2>, 2> post;

    double probability(Outcome o) const noexcept { return o ? p_one : 1.0 - p_one; }
};

struct Distribution1 {
    double p_one = 0.0;
    std::array<std::optional<StateVec1>, 2> post;

    double probability(Outcome o) const noexcept { return o ? p_one : 1.0 - p_one; }
};

Distribution2 measurement_distribution(const StateVec2& state, Qubit which, Basis basis);
Distribution1 measurement_distribution(const StateVec1& state, Basis basis);

struct Measured2 {
    Outcome outcome;
    StateVec2 state;
};

struct Measured1 {
    Outcome outcome;
    StateVec1 state;
};

// Born-rule sampling with collapse. Consumes exactly one uniform draw.
Measured2 measure_qubit(const StateVec2& state, Qubit which, Basis basis, RandomSource& rng);
Measured1 measure(const StateVec1& state, Basis basis, RandomSource& rng);

enum class Pauli : std::uint8_t { X, Z, Y };

// Y is applied as X*Z; the global phase is dropped.
StateVec2 apply_pauli(const StateVec2& state, Qubit which, Pauli pauli);
StateVec1 apply_pauli(const StateVec1& state, Pauli pauli);

// Stochastic Pauli channel: identity with probability 1 - p, otherwise one of
// X, Z, Y uniformly. Draws one uniform, plus one bounded integer on error.
// Throws std::invalid_argument for p outside [0, 1].
StateVec2 depolarize(const StateVec2& state, Qubit which, double p, RandomSource& rng);
StateVec1 depolarize(const StateVec1& state, double p, RandomSource& rng);

Amplitude inner(const StateVec2& a, const StateVec2& b) noexcept;
Amplitude inner(const StateVec1& a, const StateVec1& b) noexcept;

// Global-phase-insensitive: |<a|b>|^2 >= 1 - tol.
bool states_equal(const StateVec2& a, const StateVec2& b, double tol);
bool states_equal(const StateVec1& a, const StateVec1& b, double tol);

}  // namespace qkd::qsim
