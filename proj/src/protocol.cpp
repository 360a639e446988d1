#include "qkdpair/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace qkd::protocol {
namespace {

void require_synchronized(std::size_t alice_n, std::size_t bob_n) {
    if (alice_n != bob_n)
        throw ProtocolError("desynchronized transcript: " + std::to_string(alice_n) + " Alice rounds vs " +
                            std::to_string(bob_n) + " Bob rounds");
}

void require_same_round(RoundId a, RoundId b) {
    if (a != b)
        throw ProtocolError("desynchronized transcript: round " + std::to_string(a) + " paired with round " +
                            std::to_string(b));
}

}  // namespace

PairLabel label_for(Basis basis, Bit key_bit) noexcept {
    if (basis == Basis::Z) return key_bit ? PairLabel::Z1 : PairLabel::Z0;
    return key_bit ? PairLabel::XPhiMinus : PairLabel::XPhiPlus;
}

std::string_view label_name(PairLabel l) noexcept {
    switch (l) {
        case PairLabel::Z1: return "Z1";
        case PairLabel::Z0: return "Z0";
        case PairLabel::XPhiPlus: return "XPHI+";
        case PairLabel::XPhiMinus: return "XPHI-";
    }
    return "?";
}

PairLabel parse_label(std::string_view name) {
    for (PairLabel l : kAllLabels)
        if (label_name(l) == name) return l;
    throw std::invalid_argument("unknown pair label: " + std::string(name));
}

qsim::StateVec2 pair_state(PairLabel l) {
    using qsim::tensor;
    switch (l) {
        case PairLabel::Z1: return tensor(qsim::ket1(), qsim::ket1());
        case PairLabel::Z0: return tensor(qsim::ket0(), qsim::ket0());
        case PairLabel::XPhiPlus:
        case PairLabel::XPhiMinus: {
            // (|++> + |-->)/sqrt2 and (|+-> + |-+>)/sqrt2, built from the X
            // eigenstates rather than from their Z-basis expansions.
            const auto p = qsim::ket_plus();
            const auto m = qsim::ket_minus();
            const auto a = l == PairLabel::XPhiPlus ? tensor(p, p) : tensor(p, m);
            const auto b = l == PairLabel::XPhiPlus ? tensor(m, m) : tensor(m, p);
            qsim::StateVec2 s;
            const double k = 1.0 / std::sqrt(2.0);
            for (unsigned i = 0; i < 4; ++i) s.amps[i] = k * (a.amps[i] + b.amps[i]);
            return s;
        }
    }
    throw std::invalid_argument("bad pair label");
}

std::string_view verdict_name(Verdict v) noexcept { return v == Verdict::Clean ? "clean" : "suspect"; }

BobBits decode_bob(Basis secure_basis, Outcome secure_outcome, Outcome aux_outcome) noexcept {
    return {secure_outcome, secure_basis == Basis::X ? aux_outcome : Bit{0}};
}

BobRound bob_record(RoundId id, BobChoice choice, Outcome secure_outcome, Outcome aux_outcome,
                    BobDecoder decoder) {
    const BobBits bits = decoder(choice.secure_basis, secure_outcome, aux_outcome);
    return {id, choice.secure_qubit, choice.secure_basis, secure_outcome, aux_outcome, bits.secure_bit,
            bits.aux_bit};
}

std::pair<AliceRound, qsim::StateVec2> alice_emit(RandomSource& rng, RoundId id) {
    const PairLabel label = kAllLabels[rng.below(kAllLabels.size())];
    return {AliceRound{id, label}, pair_state(label)};
}

BobChoice bob_choose(RandomSource& rng) {
    BobChoice c;
    c.secure_qubit = rng.bit() ? Qubit::Second : Qubit::First;
    c.secure_basis = rng.bit() ? Basis::X : Basis::Z;
    return c;
}

BobRound bob_measure_pair(const qsim::StateVec2& state, BobChoice choice, RandomSource& nature, RoundId id,
                          BobDecoder decoder) {
    const auto secure = qsim::measure_qubit(state, choice.secure_qubit, choice.secure_basis, nature);
    const auto aux = qsim::measure_qubit(secure.state, qsim::other(choice.secure_qubit), Basis::X, nature);
    return bob_record(id, choice, secure.outcome, aux.outcome, decoder);
}

BobRound bob_measure_pair(const qsim::StateVec2& state, RandomSource& rng, RoundId id) {
    const BobChoice choice = bob_choose(rng);
    return bob_measure_pair(state, choice, rng, id);
}

std::string basis_string(std::span<const Basis> bases) {
    std::string s;
    s.reserve(bases.size());
    for (Basis b : bases) s.push_back(qsim::basis_char(b));
    return s;
}

std::vector<Basis> parse_basis_string(std::string_view s) {
    std::vector<Basis> out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == 'Z')
            out.push_back(Basis::Z);
        else if (c == 'X')
            out.push_back(Basis::X);
        else
            throw ProtocolError(std::string("invalid basis character '") + c + "'");
    }
    return out;
}

std::vector<std::size_t> matching_positions(std::span<const Basis> alice, std::span<const Basis> bob) {
    require_synchronized(alice.size(), bob.size());
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < alice.size(); ++i)
        if (alice[i] == bob[i]) kept.push_back(i);
    return kept;
}

SiftResult sift(std::span<const AliceRound> alice, std::span<const BobRound> bob) {
    require_synchronized(alice.size(), bob.size());
    SiftResult r;
    for (std::size_t i = 0; i < alice.size(); ++i) {
        require_same_round(alice[i].round_id, bob[i].round_id);
        if (alice[i].basis() != bob[i].secure_basis) continue;
        r.kept_round_ids.push_back(alice[i].round_id);
        r.kept_bases.push_back(alice[i].basis());
        r.alice_key.push_back(alice[i].key_bit());
        r.bob_secure_key.push_back(bob[i].secure_bit);
        r.bob_aux_key.push_back(bob[i].aux_bit);
    }
    return r;
}

KeyBits combine_keys(std::span<const Bit> secure, std::span<const Bit> aux) {
    if (secure.size() != aux.size())
        throw ProtocolError("combine_keys: secure key has " + std::to_string(secure.size()) +
                            " bits, auxiliary key " + std::to_string(aux.size()));
    KeyBits out(secure.size());
    for (std::size_t i = 0; i < secure.size(); ++i) out[i] = secure[i] ^ aux[i];
    return out;
}

std::vector<std::size_t> select_sample(std::size_t n, double fraction, RandomSource& rng) {
    if (n == 0) throw ProtocolError("verification on an empty key");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("verification fraction must lie in (0, 1]");
    // The epsilon keeps products such as 0.1 * 30 from rounding up to 4.
    const auto k = std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(fraction * double(n) - 1e-9)));

    // Partial Fisher-Yates over the index range.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

VerificationReport evaluate_sample(std::vector<std::size_t> positions, std::span<const Bit> alice_bits_at,
                                   std::span<const Bit> bob_key, double threshold) {
    if (positions.size() != alice_bits_at.size())
        throw ProtocolError("sample disclosure: positions and bits differ in length");
    VerificationReport rep;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] >= bob_key.size()) throw ProtocolError("sample disclosure: position out of range");
        if (i > 0 && positions[i] <= positions[i - 1])
            throw ProtocolError("sample disclosure: positions must be strictly ascending");
        if (alice_bits_at[i] != bob_key[positions[i]]) ++rep.mismatches;
    }
    rep.qber_estimate = positions.empty() ? 0.0 : double(rep.mismatches) / double(positions.size());
    rep.verdict = rep.qber_estimate <= threshold ? Verdict::Clean : Verdict::Suspect;
    rep.disclosed_positions = std::move(positions);
    return rep;
}

VerificationReport verify_sample(std::span<const Bit> alice_key, std::span<const Bit> bob_final_key,
                                 double fraction, double threshold, RandomSource& rng) {
    require_synchronized(alice_key.size(), bob_final_key.size());
    auto positions = select_sample(alice_key.size(), fraction, rng);
    KeyBits disclosed;
    disclosed.reserve(positions.size());
    for (std::size_t p : positions) disclosed.push_back(alice_key[p]);
    return evaluate_sample(std::move(positions), disclosed, bob_final_key, threshold);
}

KeyBits discard_positions(std::span<const Bit> key, std::span<const std::size_t> ascending_positions) {
    KeyBits out;
    out.reserve(key.size() - std::min(key.size(), ascending_positions.size()));
    std::size_t next = 0;
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (next < ascending_positions.size() && ascending_positions[next] == i) {
            ++next;
            continue;
        }
        out.push_back(key[i]);
    }
    return out;
}

qsim::StateVec1 bb84_state(Basis basis, Bit bit) { return qsim::eigenstate(basis, bit); }

std::pair<Bb84AliceRound, qsim::StateVec1> bb84_alice_emit(RandomSource& rng, RoundId id) {
    const Basis basis = rng.bit() ? Basis::X : Basis::Z;
    const Bit bit = rng.bit();
    return {Bb84AliceRound{id, basis, bit}, bb84_state(basis, bit)};
}

Basis bb84_bob_choose(RandomSource& rng) { return rng.bit() ? Basis::X : Basis::Z; }

Bb84BobRound bb84_bob_measure(const qsim::StateVec1& state, Basis basis, RandomSource& nature, RoundId id) {
    const auto m = qsim::measure(state, basis, nature);
    return {id, basis, m.outcome};
}

Bb84BobRound bb84_bob_measure(const qsim::StateVec1& state, RandomSource& rng, RoundId id) {
    const Basis basis = bb84_bob_choose(rng);
    return bb84_bob_measure(state, basis, rng, id);
}

SiftResult bb84_sift(std::span<const Bb84AliceRound> alice, std::span<const Bb84BobRound> bob) {
    require_synchronized(alice.size(), bob.size());
    SiftResult r;
    for (std::size_t i = 0; i < alice.size(); ++i) {
        require_same_round(alice[i].round_id, bob[i].round_id);
        if (alice[i].basis != bob[i].basis) continue;
        r.kept_round_ids.push_back(alice[i].round_id);
        r.kept_bases.push_back(alice[i].basis);
        r.alice_key.push_back(alice[i].bit);
        r.bob_secure_key.push_back(bob[i].bit);
        r.bob_aux_key.push_back(0);
    }
    return r;
}

std::vector<std::uint8_t> otp_encrypt(std::span<const std::uint8_t> message, std::span<const Bit> key) {
    if (key.size() < 8 * message.size())
        throw ProtocolError("one-time pad exhausted: need " + std::to_string(8 * message.size()) +
                            " key bits, have " + std::to_string(key.size()));
    std::vector<std::uint8_t> out(message.size());
    for (std::size_t i = 0; i < message.size(); ++i) {
        std::uint8_t pad = 0;
        for (std::size_t b = 0; b < 8; ++b) pad = static_cast<std::uint8_t>((pad << 1) | (key[8 * i + b] & 1u));
        out[i] = message[i] ^ pad;
    }
    return out;
}

}  // namespace qkd::protocol
