#include "qkdpair/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qkd::qsim {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Bit of `which` inside the two-qubit index b1 * 2 + b2.
constexpr unsigned shift_of(Qubit which) noexcept { return which == Qubit::First ? 1u : 0u; }

// Probabilities built from 1/sqrt(2) products carry rounding residue of a few
// ulps. Snap values that sit on a multiple of 1/64 so that the noiseless
// branch weights used by the exact oracle stay dyadic.
double clean_probability(double p) {
    const double snapped = std::round(p * 64.0) / 64.0;
    if (std::abs(p - snapped) <= 1e-14) return snapped;
    return std::clamp(p, 0.0, 1.0);
}

template <std::size_t N>
double norm_of(const std::array<Amplitude, N>& amps) {
    double s = 0.0;
    for (const auto& a : amps) s += std::norm(a);
    return s;
}

void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) throw std::invalid_argument(std::string(what) + ": non-finite amplitude");
}

void require_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("depolarize: p must lie in [0, 1]");
}

Pauli pauli_from_index(std::uint64_t k) {
    switch (k) {
        case 0: return Pauli::X;
        case 1: return Pauli::Z;
        default: return Pauli::Y;
    }
}

}  // namespace

double StateVec1::norm_squared() const noexcept { return norm_of(amps); }
double StateVec2::norm_squared() const noexcept { return norm_of(amps); }

StateVec1 eigenstate(Basis basis, Outcome outcome) {
    if (basis == Basis::Z) return outcome ? ket1() : ket0();
    return outcome ? ket_plus() : ket_minus();
}

StateVec1 ket0() { return {{Amplitude{1.0, 0.0}, Amplitude{0.0, 0.0}}}; }
StateVec1 ket1() { return {{Amplitude{0.0, 0.0}, Amplitude{1.0, 0.0}}}; }
StateVec1 ket_plus() { return {{Amplitude{kInvSqrt2, 0.0}, Amplitude{kInvSqrt2, 0.0}}}; }
StateVec1 ket_minus() { return {{Amplitude{kInvSqrt2, 0.0}, Amplitude{-kInvSqrt2, 0.0}}}; }

StateVec2 tensor(const StateVec1& a, const StateVec1& b) {
    StateVec2 out;
    for (unsigned b1 = 0; b1 < 2; ++b1)
        for (unsigned b2 = 0; b2 < 2; ++b2) out.amps[b1 * 2 + b2] = a.amps[b1] * b.amps[b2];
    return out;
}

void require_normalized(const StateVec1& s) {
    const double n = s.norm_squared();
    require_finite(n, "state");
    if (std::abs(n - 1.0) > kRejectTolerance) throw std::invalid_argument("state is not normalized");
}

void require_normalized(const StateVec2& s) {
    const double n = s.norm_squared();
    require_finite(n, "state");
    if (std::abs(n - 1.0) > kRejectTolerance) throw std::invalid_argument("state is not normalized");
}

Distribution2 measurement_distribution(const StateVec2& state, Qubit which, Basis basis) {
    require_normalized(state);
    const unsigned shift = shift_of(which);
    const unsigned mask = 1u << shift;

    Distribution2 dist;
    std::array<double, 2> weight{};
    std::array<StateVec2, 2> projected{};
    for (Outcome o = 0; o < 2; ++o) {
        const StateVec1 e = eigenstate(basis, o);
        // (|e><e| on the measured qubit) applied to the state.
        for (unsigned i = 0; i < 4; ++i) {
            const unsigned rest = i & ~mask;
            const unsigned bit = (i >> shift) & 1u;
            const Amplitude overlap =
                std::conj(e.amps[0]) * state.amps[rest] + std::conj(e.amps[1]) * state.amps[rest | mask];
            projected[o].amps[i] = e.amps[bit] * overlap;
        }
        weight[o] = projected[o].norm_squared();
    }

    const double total = weight[0] + weight[1];
    dist.p_one = clean_probability(weight[1] / total);
    for (Outcome o = 0; o < 2; ++o) {
        if (dist.probability(o) <= 0.0) continue;
        const double scale = 1.0 / std::sqrt(weight[o]);
        StateVec2 post = projected[o];
        for (auto& a : post.amps) a *= scale;
        dist.post[o] = post;
    }
    return dist;
}

Distribution1 measurement_distribution(const StateVec1& state, Basis basis) {
    require_normalized(state);
    Distribution1 dist;
    std::array<double, 2> weight{};
    std::array<StateVec1, 2> projected{};
    for (Outcome o = 0; o < 2; ++o) {
        const StateVec1 e = eigenstate(basis, o);
        const Amplitude overlap = inner(e, state);
        projected[o].amps = {e.amps[0] * overlap, e.amps[1] * overlap};
        weight[o] = projected[o].norm_squared();
    }
    const double total = weight[0] + weight[1];
    dist.p_one = clean_probability(weight[1] / total);
    for (Outcome o = 0; o < 2; ++o) {
        if (dist.probability(o) <= 0.0) continue;
        const double scale = 1.0 / std::sqrt(weight[o]);
        StateVec1 post = projected[o];
        for (auto& a : post.amps) a *= scale;
        dist.post[o] = post;
    }
    return dist;
}

Measured2 measure_qubit(const StateVec2& state, Qubit which, Basis basis, RandomSource& rng) {
    const Distribution2 dist = measurement_distribution(state, which, basis);
    const Outcome o = rng.uniform() < dist.p_one ? 1 : 0;
    return {o, *dist.post[o]};
}

Measured1 measure(const StateVec1& state, Basis basis, RandomSource& rng) {
    const Distribution1 dist = measurement_distribution(state, basis);
    const Outcome o = rng.uniform() < dist.p_one ? 1 : 0;
    return {o, *dist.post[o]};
}

StateVec2 apply_pauli(const StateVec2& state, Qubit which, Pauli pauli) {
    const unsigned shift = shift_of(which);
    const unsigned mask = 1u << shift;
    StateVec2 out = state;
    if (pauli == Pauli::Z || pauli == Pauli::Y) {
        for (unsigned i = 0; i < 4; ++i)
            if (i & mask) out.amps[i] = -out.amps[i];
    }
    if (pauli == Pauli::X || pauli == Pauli::Y) {
        StateVec2 flipped;
        for (unsigned i = 0; i < 4; ++i) flipped.amps[i ^ mask] = out.amps[i];
        out = flipped;
    }
    return out;
}

StateVec1 apply_pauli(const StateVec1& state, Pauli pauli) {
    StateVec1 out = state;
    if (pauli == Pauli::Z || pauli == Pauli::Y) out.amps[1] = -out.amps[1];
    if (pauli == Pauli::X || pauli == Pauli::Y) std::swap(out.amps[0], out.amps[1]);
    return out;
}

StateVec2 depolarize(const StateVec2& state, Qubit which, double p, RandomSource& rng) {
    require_probability(p);
    if (rng.uniform() >= p) return state;
    return apply_pauli(state, which, pauli_from_index(rng.below(3)));
}

StateVec1 depolarize(const StateVec1& state, double p, RandomSource& rng) {
    require_probability(p);
    if (rng.uniform() >= p) return state;
    return apply_pauli(state, pauli_from_index(rng.below(3)));
}

Amplitude inner(const StateVec2& a, const StateVec2& b) noexcept {
    Amplitude s{0.0, 0.0};
    for (unsigned i = 0; i < 4; ++i) s += std::conj(a.amps[i]) * b.amps[i];
    return s;
}

Amplitude inner(const StateVec1& a, const StateVec1& b) noexcept {
    return std::conj(a.amps[0]) * b.amps[0] + std::conj(a.amps[1]) * b.amps[1];
}

bool states_equal(const StateVec2& a, const StateVec2& b, double tol) {
    return std::norm(inner(a, b)) >= 1.0 - tol;
}

bool states_equal(const StateVec1& a, const StateVec1& b, double tol) {
    return std::norm(inner(a, b)) >= 1.0 - tol;
}

}  // namespace qkd::qsim
