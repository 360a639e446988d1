#pragma once

// State machines for the qubit-pair key distribution scheme and the BB84
// baseline: emission, Bob's decoding conventions, sifting, sample
// verification and key combination.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qkdpair/qsim.hpp"
#include "qkdpair/random.hpp"

namespace qkd::protocol {

using qsim::Basis;
using qsim::Outcome;
using qsim::Qubit;

using Bit = std::uint8_t;
using KeyBits = std::vector<Bit>;
using RoundId = std::uint64_t;

// Raised when the two sides' records cannot be reconciled, or a key is
// exhausted.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Alice's four pair states.
//   Z1        |1>|1>                      key 1
//   Z0        |0>|0>                      key 0
//   XPhiPlus  (|+>|+> + |->|->)/sqrt2      key 0
//   XPhiMinus (|+>|-> + |->|+>)/sqrt2      key 1
enum class PairLabel : std::uint8_t { Z1, Z0, XPhiPlus, XPhiMinus };

inline constexpr std::array<PairLabel, 4> kAllLabels = {PairLabel::Z1, PairLabel::Z0, PairLabel::XPhiPlus,
                                                        PairLabel::XPhiMinus};

constexpr Basis basis_of(PairLabel l) noexcept {
    return (l == PairLabel::Z1 || l == PairLabel::Z0) ? Basis::Z : Basis::X;
}

constexpr Bit key_bit_of(PairLabel l) noexcept {
    return (l == PairLabel::Z1 || l == PairLabel::XPhiMinus) ? 1 : 0;
}

PairLabel label_for(Basis basis, Bit key_bit) noexcept;

// Wire names: "Z1", "Z0", "XPHI+", "XPHI-".
std::string_view label_name(PairLabel l) noexcept;
PairLabel parse_label(std::string_view name);

qsim::StateVec2 pair_state(PairLabel l);

enum class Verdict : std::uint8_t { Clean, Suspect };

std::string_view verdict_name(Verdict v) noexcept;  // "clean" / "suspect"

struct AliceRound {
    RoundId round_id = 0;
    PairLabel label = PairLabel::Z0;

    Basis basis() const noexcept { return basis_of(label); }
    Bit key_bit() const noexcept { return key_bit_of(label); }

    bool operator==(const AliceRound&) const = default;
};

// Bob's per-round private choices.
struct BobChoice {
    Qubit secure_qubit = Qubit::First;
    Basis secure_basis = Basis::Z;

    bool operator==(const BobChoice&) const = default;
};

struct BobRound {
    RoundId round_id = 0;
    Qubit secure_qubit = Qubit::First;
    Basis secure_basis = Basis::Z;
    Outcome secure_outcome = 0;
    Outcome aux_outcome = 0;  // always measured in X
    Bit secure_bit = 0;
    Bit aux_bit = 0;

    Qubit aux_qubit() const noexcept { return qsim::other(secure_qubit); }

    bool operator==(const BobRound&) const = default;
};

struct BobBits {
    Bit secure_bit;
    Bit aux_bit;
};

// Bob's decoding conventions. Secure: |1>,|+> -> 1 and |0>,|-> -> 0.
// Auxiliary: the X outcome when the secure basis was X, otherwise 0.
using BobDecoder = BobBits (*)(Basis secure_basis, Outcome secure_outcome, Outcome aux_outcome);

BobBits decode_bob(Basis secure_basis, Outcome secure_outcome, Outcome aux_outcome) noexcept;

BobRound bob_record(RoundId id, BobChoice choice, Outcome secure_outcome, Outcome aux_outcome,
                    BobDecoder decoder = &decode_bob);

// Draw Alice's label uniformly; one bounded draw.
std::pair<AliceRound, qsim::StateVec2> alice_emit(RandomSource& rng, RoundId id = 0);

// Draw Bob's role then his secure basis; two bit draws.
BobChoice bob_choose(RandomSource& rng);

// Measure the secure qubit in the chosen basis, then the auxiliary qubit in X,
// both outcomes from `nature`.
BobRound bob_measure_pair(const qsim::StateVec2& state, BobChoice choice, RandomSource& nature,
                          RoundId id = 0, BobDecoder decoder = &decode_bob);

// Single-stream form: choices then outcomes from the same source.
BobRound bob_measure_pair(const qsim::StateVec2& state, RandomSource& rng, RoundId id = 0);

struct SiftResult {
    std::vector<RoundId> kept_round_ids;
    std::vector<Basis> kept_bases;
    KeyBits alice_key;
    KeyBits bob_secure_key;
    KeyBits bob_aux_key;

    std::size_t size() const noexcept { return kept_round_ids.size(); }
};

// Bases as announced on the public channel, one 'Z'/'X' per round.
std::string basis_string(std::span<const Basis> bases);
std::vector<Basis> parse_basis_string(std::string_view s);

// Indices i where alice[i] == bob[i]; throws ProtocolError on length mismatch.
std::vector<std::size_t> matching_positions(std::span<const Basis> alice, std::span<const Basis> bob);

SiftResult sift(std::span<const AliceRound> alice, std::span<const BobRound> bob);

KeyBits combine_keys(std::span<const Bit> secure, std::span<const Bit> aux);

struct VerificationReport {
    std::vector<std::size_t> disclosed_positions;  // ascending, into the sifted key
    std::size_t mismatches = 0;
    double qber_estimate = 0.0;
    Verdict verdict = Verdict::Clean;
};

inline constexpr double kDefaultVerifyFraction = 0.1;
inline constexpr double kNoiselessThreshold = 0.0;
inline constexpr double kNoisyThreshold = 0.11;

// ceil(fraction * n) distinct positions chosen uniformly without replacement,
// returned ascending. Requires n > 0 and 0 < fraction <= 1.
std::vector<std::size_t> select_sample(std::size_t n, double fraction, RandomSource& rng);

VerificationReport evaluate_sample(std::vector<std::size_t> positions, std::span<const Bit> alice_bits_at,
                                   std::span<const Bit> bob_key, double threshold);

VerificationReport verify_sample(std::span<const Bit> alice_key, std::span<const Bit> bob_final_key,
                                 double fraction, double threshold, RandomSource& rng);

// The key with the disclosed positions removed.
KeyBits discard_positions(std::span<const Bit> key, std::span<const std::size_t> ascending_positions);

// BB84 with the same bit coding as the pair scheme: |0>,|-> -> 0, |1>,|+> -> 1.
struct Bb84AliceRound {
    RoundId round_id = 0;
    Basis basis = Basis::Z;
    Bit bit = 0;

    bool operator==(const Bb84AliceRound&) const = default;
};

struct Bb84BobRound {
    RoundId round_id = 0;
    Basis basis = Basis::Z;
    Bit bit = 0;

    bool operator==(const Bb84BobRound&) const = default;
};

qsim::StateVec1 bb84_state(Basis basis, Bit bit);

// Basis bit then value bit.
std::pair<Bb84AliceRound, qsim::StateVec1> bb84_alice_emit(RandomSource& rng, RoundId id = 0);

Basis bb84_bob_choose(RandomSource& rng);

Bb84BobRound bb84_bob_measure(const qsim::StateVec1& state, Basis basis, RandomSource& nature, RoundId id = 0);
Bb84BobRound bb84_bob_measure(const qsim::StateVec1& state, RandomSource& rng, RoundId id = 0);

// Aux key is all zeros so combine_keys leaves the secure key unchanged.
SiftResult bb84_sift(std::span<const Bb84AliceRound> alice, std::span<const Bb84BobRound> bob);

// Packs key bits MSB-first into bytes and XORs. Throws ProtocolError when the
// key holds fewer than 8 * message.size() bits.
std::vector<std::uint8_t> otp_encrypt(std::span<const std::uint8_t> message, std::span<const Bit> key);

}  // namespace qkd::protocol
