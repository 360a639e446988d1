#include <gtest/gtest.h>

#include <cmath>

#include "qkdpair/protocol.hpp"
#include "qkdpair/random.hpp"
#include "support/round_table.hpp"

using namespace qkd;
using namespace qkd::protocol;
using qsim::Basis;
using qsim::Qubit;

namespace {

const std::string kRoundTable = std::string(QKDPAIR_TEST_DATA) + "/round_table.json";

std::complex<double> amp(double re) { return {re, 0.0}; }

}  // namespace

TEST(Labels, BasesAndBits) {
    EXPECT_EQ(basis_of(PairLabel::Z1), Basis::Z);
    EXPECT_EQ(basis_of(PairLabel::XPhiMinus), Basis::X);
    EXPECT_EQ(key_bit_of(PairLabel::Z1), 1);
    EXPECT_EQ(key_bit_of(PairLabel::Z0), 0);
    EXPECT_EQ(key_bit_of(PairLabel::XPhiPlus), 0);
    EXPECT_EQ(key_bit_of(PairLabel::XPhiMinus), 1);
    for (auto l : kAllLabels) {
        EXPECT_EQ(label_for(basis_of(l), key_bit_of(l)), l);
        EXPECT_EQ(parse_label(label_name(l)), l);
    }
    EXPECT_THROW(parse_label("XPHI"), std::invalid_argument);
}

TEST(Labels, PairStates) {
    const double k = 1 / std::sqrt(2.0);
    qsim::StateVec2 z1, phi_plus, phi_minus;
    z1.amps = {0, 0, 0, amp(1)};
    phi_plus.amps = {amp(k), 0, 0, amp(k)};
    phi_minus.amps = {amp(k), 0, 0, amp(-k)};
    EXPECT_TRUE(qsim::states_equal(pair_state(PairLabel::Z1), z1, qsim::kExactTolerance));
    EXPECT_TRUE(qsim::states_equal(pair_state(PairLabel::XPhiPlus), phi_plus, qsim::kExactTolerance));
    EXPECT_TRUE(qsim::states_equal(pair_state(PairLabel::XPhiMinus), phi_minus, qsim::kExactTolerance));
    EXPECT_FALSE(qsim::states_equal(pair_state(PairLabel::XPhiPlus), phi_minus, 1e-3));
}

TEST(AliceEmit, UniformLabelsAndConsistentState) {
    RandomSource rng(4);
    std::array<int, 4> counts{};
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        auto [a, s] = alice_emit(rng, i + 1);
        EXPECT_EQ(a.round_id, std::uint64_t(i + 1));
        EXPECT_TRUE(qsim::states_equal(s, pair_state(a.label), qsim::kExactTolerance));
        ++counts[static_cast<int>(a.label)];
    }
    const double sigma = std::sqrt(n * 0.25 * 0.75);
    for (int c : counts) EXPECT_LT(std::abs(c - n / 4.0), 4 * sigma);
}

TEST(BobMeasure, ZStateGivesZeroBits) {
    RandomSource rng(1);
    for (int i = 0; i < 200; ++i) {
        const BobChoice c{i % 2 ? Qubit::First : Qubit::Second, Basis::Z};
        const auto b = bob_measure_pair(pair_state(PairLabel::Z0), c, rng);
        EXPECT_EQ(b.secure_bit, 0);
        EXPECT_EQ(b.aux_bit, 0);
    }
}

TEST(BobMeasure, BellCorrelationsInX) {
    RandomSource rng(2);
    const int n = 20000;
    for (auto label : {PairLabel::XPhiPlus, PairLabel::XPhiMinus}) {
        int ones = 0;
        for (int i = 0; i < n; ++i) {
            const BobChoice c{i % 2 ? Qubit::First : Qubit::Second, Basis::X};
            const auto b = bob_measure_pair(pair_state(label), c, rng);
            if (label == PairLabel::XPhiPlus)
                EXPECT_EQ(b.secure_bit, b.aux_bit);
            else
                EXPECT_NE(b.secure_bit, b.aux_bit);
            ones += b.secure_bit;
        }
        EXPECT_LT(std::abs(ones - n / 2.0), 4 * std::sqrt(n * 0.25));
    }
}

TEST(BobMeasure, DecoderConvention) {
    EXPECT_EQ(decode_bob(Basis::Z, 1, 1).aux_bit, 0);
    EXPECT_EQ(decode_bob(Basis::Z, 1, 0).secure_bit, 1);
    EXPECT_EQ(decode_bob(Basis::X, 0, 1).aux_bit, 1);
    EXPECT_EQ(decode_bob(Basis::X, 1, 0).secure_bit, 1);
}

TEST(RoundTable, PlaybackReproducesAllRows) {
    const auto t = fixtures::load_round_table(kRoundTable);
    ASSERT_EQ(t.size(), 15u);
    const auto p = fixtures::play(t);
    const auto sift_result = sift(p.alice, p.bob);
    EXPECT_EQ(sift_result.size(), 15u);
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_EQ(sift_result.alice_key[i], t.alice_bit[i]) << "column " << i + 1;
        EXPECT_EQ(sift_result.bob_secure_key[i], t.secure_bit[i]) << "column " << i + 1;
        EXPECT_EQ(sift_result.bob_aux_key[i], t.aux_bit[i]) << "column " << i + 1;
        if (t.basis[i] == 'z') {
            EXPECT_EQ(sift_result.bob_aux_key[i], 0) << "column " << i + 1;
        }
    }
    const auto combined = combine_keys(sift_result.bob_secure_key, sift_result.bob_aux_key);
    EXPECT_EQ(combined, sift_result.alice_key);

    const auto cols = analysis::trace_columns(p.alice, p.bob, true);
    const auto lines = fixtures::split_lines(analysis::format_trace_table(cols));
    const auto expected = fixtures::expected_rows(t);
    ASSERT_EQ(lines.size(), expected.size());
    for (std::size_t r = 0; r < expected.size(); ++r) EXPECT_EQ(lines[r], expected[r]);
}

TEST(RoundTable, EveryColumnIsPhysicallyPossible) {
    // Each recorded (secure, aux) pair has non-zero Born probability under
    // Alice's state, for either role assignment.
    const auto t = fixtures::load_round_table(kRoundTable);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto basis = t.basis[i] == 'z' ? Basis::Z : Basis::X;
        const auto state = pair_state(label_for(basis, static_cast<Bit>(t.alice_bit[i])));
        for (Qubit q : {Qubit::First, Qubit::Second}) {
            const auto d1 = qsim::measurement_distribution(state, q, basis);
            const auto so = fixtures::outcome_of(t.secure_state[i]);
            ASSERT_GT(d1.probability(so), 0.0) << "column " << i + 1;
            const auto d2 = qsim::measurement_distribution(*d1.post[so], qsim::other(q), Basis::X);
            EXPECT_GT(d2.probability(fixtures::outcome_of(t.aux_state[i])), 0.0) << "column " << i + 1;
        }
    }
}

TEST(Sift, KeepsMatchingBases) {
    std::vector<AliceRound> a = {{1, PairLabel::Z1}, {2, PairLabel::XPhiPlus}, {3, PairLabel::Z0}};
    std::vector<BobRound> b(3);
    b[0] = bob_record(1, {Qubit::First, Basis::Z}, 1, 0);
    b[1] = bob_record(2, {Qubit::First, Basis::Z}, 0, 0);
    b[2] = bob_record(3, {Qubit::First, Basis::X}, 0, 1);
    const auto s = sift(a, b);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s.kept_round_ids[0], 1u);
    EXPECT_EQ(s.alice_key, KeyBits{1});
    EXPECT_EQ(s.bob_secure_key, KeyBits{1});
    EXPECT_EQ(s.kept_bases[0], Basis::Z);
}

TEST(Sift, RejectsDesynchronizedInput) {
    std::vector<AliceRound> a = {{1, PairLabel::Z1}, {2, PairLabel::Z0}};
    std::vector<BobRound> b = {bob_record(1, {Qubit::First, Basis::Z}, 1, 0)};
    EXPECT_THROW(sift(a, b), ProtocolError);
    b.push_back(bob_record(3, {Qubit::First, Basis::Z}, 0, 0));
    EXPECT_THROW(sift(a, b), ProtocolError);
}

TEST(Sift, BasisStrings) {
    const std::vector<Basis> v = {Basis::Z, Basis::X, Basis::X};
    EXPECT_EQ(basis_string(v), "ZXX");
    EXPECT_EQ(parse_basis_string("ZXX"), v);
    EXPECT_THROW(parse_basis_string("ZQ"), ProtocolError);
    EXPECT_EQ(matching_positions(v, std::vector<Basis>{Basis::Z, Basis::Z, Basis::X}), (std::vector<std::size_t>{0, 2}));
    EXPECT_THROW(matching_positions(v, std::vector<Basis>{Basis::Z}), ProtocolError);
}

TEST(Combine, XorAndErrors) {
    const KeyBits secure = {0, 1, 0, 0, 1, 0, 0};
    const KeyBits aux = {0, 0, 1, 0, 0, 0, 0};
    EXPECT_EQ(combine_keys(secure, aux), (KeyBits{0, 1, 1, 0, 1, 0, 0}));
    EXPECT_EQ(combine_keys(secure, KeyBits(7, 0)), secure);
    EXPECT_EQ(combine_keys(secure, secure), KeyBits(7, 0));
    EXPECT_THROW(combine_keys(secure, KeyBits{1}), ProtocolError);
}

TEST(Verify, SampleSelection) {
    RandomSource rng(6);
    for (std::size_t n : {1u, 7u, 10u, 99u, 1000u}) {
        for (double f : {0.1, 0.25, 1.0}) {
            const auto pos = select_sample(n, f, rng);
            EXPECT_EQ(pos.size(), static_cast<std::size_t>(std::ceil(f * n - 1e-9)));
            EXPECT_TRUE(std::is_sorted(pos.begin(), pos.end()));
            EXPECT_EQ(std::adjacent_find(pos.begin(), pos.end()), pos.end());
            for (auto p : pos) EXPECT_LT(p, n);
        }
    }
    EXPECT_THROW(select_sample(0, 0.1, rng), ProtocolError);
    EXPECT_THROW(select_sample(10, 0.0, rng), std::invalid_argument);
    EXPECT_THROW(select_sample(10, 1.5, rng), std::invalid_argument);
}

TEST(Verify, SampleIsUniform) {
    // Each position of a 10-bit key is disclosed with probability 3/10.
    RandomSource rng(12);
    std::array<int, 10> hits{};
    const int n = 30000;
    for (int i = 0; i < n; ++i)
        for (auto p : select_sample(10, 0.3, rng)) ++hits[p];
    const double sigma = std::sqrt(n * 0.3 * 0.7);
    for (int h : hits) EXPECT_LT(std::abs(h - n * 0.3), 4 * sigma);
}

TEST(Verify, Verdicts) {
    RandomSource rng(3);
    const KeyBits k(50, 1);
    auto same = verify_sample(k, k, 0.2, 0.0, rng);
    EXPECT_EQ(same.mismatches, 0u);
    EXPECT_EQ(same.verdict, Verdict::Clean);
    EXPECT_EQ(same.disclosed_positions.size(), 10u);

    auto all = verify_sample(k, KeyBits(50, 0), 1.0, 0.11, rng);
    EXPECT_DOUBLE_EQ(all.qber_estimate, 1.0);
    EXPECT_EQ(all.verdict, Verdict::Suspect);

    // Threshold is inclusive.
    const KeyBits bob = {1, 0, 1, 1};
    auto r = evaluate_sample({0, 1, 2, 3}, KeyBits{1, 1, 1, 1}, bob, 0.25);
    EXPECT_EQ(r.mismatches, 1u);
    EXPECT_DOUBLE_EQ(r.qber_estimate, 0.25);
    EXPECT_EQ(r.verdict, Verdict::Clean);
    EXPECT_THROW(verify_sample(KeyBits{}, KeyBits{}, 0.1, 0.0, rng), ProtocolError);
    EXPECT_THROW(verify_sample(k, KeyBits(3, 1), 0.1, 0.0, rng), ProtocolError);
}

TEST(Verify, DiscardPositions) {
    const KeyBits k = {1, 0, 1, 1, 0};
    EXPECT_EQ(discard_positions(k, std::vector<std::size_t>{0, 3}), (KeyBits{0, 1, 0}));
    EXPECT_EQ(discard_positions(k, std::vector<std::size_t>{}), k);
}

TEST(Invariants, NoiselessRoundsDecodeExactly) {
    // Over many seeds: combined == Alice on every kept round; z-rounds carry
    // aux 0 and the raw bit; x-rounds flip exactly when aux is 1.
    std::size_t kept = 0, kept_x = 0, aux_ones = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RandomSource rng(seed);
        std::vector<AliceRound> a;
        std::vector<BobRound> b;
        for (RoundId r = 1; r <= 1000; ++r) {
            auto [ar, s] = alice_emit(rng, r);
            a.push_back(ar);
            b.push_back(bob_measure_pair(s, rng, r));
        }
        const auto s = sift(a, b);
        kept += s.size();
        for (std::size_t i = 0; i < s.size(); ++i) {
            EXPECT_EQ(s.alice_key[i], s.bob_secure_key[i] ^ s.bob_aux_key[i]);
            if (s.kept_bases[i] == Basis::Z) {
                EXPECT_EQ(s.bob_aux_key[i], 0);
                EXPECT_EQ(s.bob_secure_key[i], s.alice_key[i]);
            } else {
                ++kept_x;
                aux_ones += s.bob_aux_key[i];
                EXPECT_EQ(s.bob_secure_key[i] != s.alice_key[i], s.bob_aux_key[i] == 1);
            }
        }
    }
    const double n = 20000;
    EXPECT_LT(std::abs(double(kept) - n / 2), 4 * std::sqrt(n / 4));
    EXPECT_LT(std::abs(double(aux_ones) - kept_x / 2.0), 4 * std::sqrt(kept_x / 4.0));
}

TEST(Bb84, EncodingAndMeasurement) {
    EXPECT_TRUE(qsim::states_equal(bb84_state(Basis::Z, 1), qsim::ket1(), qsim::kExactTolerance));
    EXPECT_TRUE(qsim::states_equal(bb84_state(Basis::X, 1), qsim::ket_plus(), qsim::kExactTolerance));
    EXPECT_TRUE(qsim::states_equal(bb84_state(Basis::X, 0), qsim::ket_minus(), qsim::kExactTolerance));
    RandomSource rng(5);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(bb84_bob_measure(qsim::ket1(), Basis::Z, rng).bit, 1);
        EXPECT_EQ(bb84_bob_measure(qsim::ket_minus(), Basis::X, rng).bit, 0);
    }
    int ones = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) ones += bb84_bob_measure(qsim::ket_plus(), Basis::Z, rng).bit;
    EXPECT_LT(std::abs(ones - n / 2.0), 4 * std::sqrt(n / 4.0));
}

TEST(Bb84, SiftHasZeroAux) {
    RandomSource rng(9);
    std::vector<Bb84AliceRound> a;
    std::vector<Bb84BobRound> b;
    for (RoundId r = 1; r <= 10000; ++r) {
        auto [ar, s] = bb84_alice_emit(rng, r);
        a.push_back(ar);
        b.push_back(bb84_bob_measure(s, rng, r));
    }
    const auto s = bb84_sift(a, b);
    EXPECT_EQ(s.bob_aux_key, KeyBits(s.size(), 0));
    EXPECT_EQ(combine_keys(s.bob_secure_key, s.bob_aux_key), s.alice_key);
    EXPECT_LT(std::abs(double(s.size()) - 5000), 4 * std::sqrt(2500.0));
    for (std::size_t i = 0; i < s.size(); ++i)
        EXPECT_EQ(a[s.kept_round_ids[i] - 1].basis, b[s.kept_round_ids[i] - 1].basis);
}

TEST(OneTimePad, RoundTripAndErrors) {
    const std::vector<std::uint8_t> msg = {0x41, 0x00, 0xff};
    KeyBits key;
    RandomSource rng(1);
    for (int i = 0; i < 24; ++i) key.push_back(rng.bit());
    const auto c = otp_encrypt(msg, key);
    EXPECT_EQ(otp_encrypt(c, key), msg);
    EXPECT_EQ(otp_encrypt(std::vector<std::uint8_t>{0x41}, KeyBits(8, 1)), std::vector<std::uint8_t>{0xbe});
    EXPECT_EQ(otp_encrypt(msg, KeyBits(24, 0)), msg);
    // A zero message reveals the key's bytes, MSB first.
    EXPECT_EQ(otp_encrypt(std::vector<std::uint8_t>{0}, KeyBits{1, 0, 0, 0, 0, 0, 0, 1}),
              std::vector<std::uint8_t>{0x81});
    EXPECT_THROW(otp_encrypt(msg, KeyBits(23, 0)), ProtocolError);
}
