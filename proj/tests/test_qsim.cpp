#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "qkdpair/qsim.hpp"
#include "qkdpair/random.hpp"

using namespace qkd;
using namespace qkd::qsim;

namespace {

// Brute-force reference: dense 4x4 projectors built as Kronecker products.
using C = std::complex<double>;
using Mat2 = std::array<std::array<C, 2>, 2>;
using Mat4 = std::array<std::array<C, 4>, 4>;

Mat2 projector(Basis b, Outcome o) {
    const double h = 0.5;
    if (b == Basis::Z) return o ? Mat2{{{0, 0}, {0, 1}}} : Mat2{{{1, 0}, {0, 0}}};
    const double s = o ? 1.0 : -1.0;  // X: 1 -> |+>, 0 -> |->
    return Mat2{{{h, s * h}, {s * h, h}}};
}

Mat2 identity2() { return Mat2{{{1, 0}, {0, 1}}}; }

Mat4 kron(const Mat2& a, const Mat2& b) {
    Mat4 m{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) m[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
    return m;
}

std::array<C, 4> apply(const Mat4& m, const std::array<C, 4>& v) {
    std::array<C, 4> out{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out[i] += m[i][j] * v[j];
    return out;
}

double norm2(const std::array<C, 4>& v) {
    double n = 0;
    for (auto a : v) n += std::norm(a);
    return n;
}

StateVec2 random_state(RandomSource& rng) {
    StateVec2 s;
    for (auto& a : s.amps) a = {rng.uniform() - 0.5, rng.uniform() - 0.5};
    const double n = std::sqrt(s.norm_squared());
    for (auto& a : s.amps) a /= n;
    return s;
}

}  // namespace

TEST(RandomSource, EngineMatchesStandardSequence) {
    // The standard requires the 10000th output of a default mt19937_64.
    RandomSource r(5489u);
    std::uint64_t x = 0;
    for (int i = 0; i < 10000; ++i) x = r.next_u64();
    EXPECT_EQ(x, 9981545732273789042ull);
}

TEST(RandomSource, StreamsAreDistinctAndReproducible) {
    auto a = RandomSource::for_stream(7, Stream::Alice, 3);
    auto b = RandomSource::for_stream(7, Stream::Alice, 3);
    auto c = RandomSource::for_stream(7, Stream::Bob, 3);
    auto d = RandomSource::for_stream(7, Stream::Alice, 4);
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
    EXPECT_NE(va, d.next_u64());
}

TEST(RandomSource, BelowIsUniform) {
    RandomSource r(11);
    std::array<int, 3> counts{};
    const int n = 300000;
    for (int i = 0; i < n; ++i) ++counts[r.below(3)];
    const double sigma = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
    for (int c : counts) EXPECT_LT(std::abs(c - n / 3.0), 4 * sigma);
}

TEST(Qsim, EigenstatesPerConvention) {
    const double k = 1 / std::sqrt(2.0);
    EXPECT_EQ(eigenstate(Basis::Z, 0).amps[0], C(1));
    EXPECT_EQ(eigenstate(Basis::Z, 1).amps[1], C(1));
    EXPECT_NEAR(ket_plus().amps[1].real(), k, 1e-15);
    EXPECT_NEAR(ket_minus().amps[1].real(), -k, 1e-15);
    EXPECT_TRUE(states_equal(eigenstate(Basis::X, 1), ket_plus(), kExactTolerance));
    EXPECT_TRUE(states_equal(eigenstate(Basis::X, 0), ket_minus(), kExactTolerance));
}

TEST(Qsim, TensorOrdersQubitOneFirst) {
    const auto s = tensor(ket1(), ket0());  // |10>
    EXPECT_EQ(s.amps[2], C(1));
    EXPECT_EQ(s.amps[1], C(0));
}

TEST(Qsim, DistributionMatchesKroneckerProjectors) {
    RandomSource rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = random_state(rng);
        for (Qubit q : {Qubit::First, Qubit::Second}) {
            for (Basis b : {Basis::Z, Basis::X}) {
                const auto d = measurement_distribution(s, q, b);
                for (Outcome o : {Outcome(0), Outcome(1)}) {
                    const Mat4 P = q == Qubit::First ? kron(projector(b, o), identity2())
                                                     : kron(identity2(), projector(b, o));
                    const auto proj = apply(P, s.amps);
                    const double p = norm2(proj);
                    EXPECT_NEAR(d.probability(o), p, 1e-12);
                    ASSERT_TRUE(d.post[o].has_value());
                    StateVec2 expected;
                    for (int i = 0; i < 4; ++i) expected.amps[i] = proj[i] / std::sqrt(p);
                    EXPECT_TRUE(states_equal(*d.post[o], expected, 1e-10));
                }
            }
        }
    }
}

TEST(Qsim, EigenstateMeasurementIsDeterministic) {
    RandomSource rng(1);
    const auto z0 = tensor(ket0(), ket0());
    for (int i = 0; i < 100; ++i) {
        const auto m = measure_qubit(z0, Qubit::First, Basis::Z, rng);
        EXPECT_EQ(m.outcome, 0);
        EXPECT_TRUE(states_equal(m.state, z0, kExactTolerance));
    }
    const auto d = measurement_distribution(z0, Qubit::Second, Basis::X);
    EXPECT_DOUBLE_EQ(d.p_one, 0.5);
}

TEST(Qsim, ImpossibleOutcomeHasNoPostState) {
    const auto d = measurement_distribution(tensor(ket1(), ket_plus()), Qubit::Second, Basis::X);
    EXPECT_DOUBLE_EQ(d.p_one, 1.0);
    EXPECT_FALSE(d.post[0].has_value());
}

TEST(Qsim, BornFrequencyConverges) {
    // |psi> = cos(t)|0> + sin(t)|1> on qubit 1: P(Z = 1) = sin^2 t.
    const double t = 0.4;
    StateVec1 a;
    a.amps = {C(std::cos(t)), C(std::sin(t))};
    const auto s = tensor(a, ket0());
    const double p = std::sin(t) * std::sin(t);
    RandomSource rng(99);
    const int n = 100000;
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += measure_qubit(s, Qubit::First, Basis::Z, rng).outcome;
    EXPECT_LT(std::abs(ones - n * p), 4 * std::sqrt(n * p * (1 - p)));
}

TEST(Qsim, BellCorrelations) {
    // Phi+ = (|00> + |11>)/sqrt2 is (|++> + |-->)/sqrt2: Z outcomes agree, X outcomes agree.
    const double k = 1 / std::sqrt(2.0);
    StateVec2 phi;
    phi.amps = {C(k), 0, 0, C(k)};
    RandomSource rng(5);
    for (Basis b : {Basis::Z, Basis::X}) {
        for (int i = 0; i < 500; ++i) {
            const auto m1 = measure_qubit(phi, Qubit::First, b, rng);
            const auto m2 = measure_qubit(m1.state, Qubit::Second, b, rng);
            EXPECT_EQ(m1.outcome, m2.outcome);
        }
    }
    // Mixed bases are uncorrelated.
    const auto d = measurement_distribution(*measurement_distribution(phi, Qubit::First, Basis::Z).post[1],
                                            Qubit::Second, Basis::X);
    EXPECT_NEAR(d.p_one, 0.5, 1e-15);
}

TEST(Qsim, SameSeedSameOutcomes) {
    const auto s = tensor(ket_plus(), ket_minus());
    RandomSource a(42), b(42);
    for (int i = 0; i < 1000; ++i)
        EXPECT_EQ(measure_qubit(s, Qubit::Second, Basis::Z, a).outcome,
                  measure_qubit(s, Qubit::Second, Basis::Z, b).outcome);
}

TEST(Qsim, RejectsUnnormalizedState) {
    StateVec2 bad;
    bad.amps = {C(1), C(1), 0, 0};
    RandomSource rng(1);
    EXPECT_THROW(measurement_distribution(bad, Qubit::First, Basis::Z), std::invalid_argument);
    EXPECT_THROW(measure_qubit(bad, Qubit::First, Basis::Z, rng), std::invalid_argument);
    StateVec1 bad1;
    bad1.amps = {C(0.5), C(0.5)};
    EXPECT_THROW(measure(bad1, Basis::X, rng), std::invalid_argument);
    // Within the rejection tolerance is accepted.
    StateVec1 near;
    near.amps = {C(1.0 + 1e-8), C(0)};
    EXPECT_NO_THROW(measure(near, Basis::Z, rng));
}

TEST(Qsim, PauliActions) {
    EXPECT_TRUE(states_equal(apply_pauli(ket0(), Pauli::X), ket1(), kExactTolerance));
    EXPECT_TRUE(states_equal(apply_pauli(ket_plus(), Pauli::Z), ket_minus(), kExactTolerance));
    EXPECT_TRUE(states_equal(apply_pauli(ket0(), Pauli::Y), ket1(), kExactTolerance));
    EXPECT_TRUE(states_equal(apply_pauli(ket_plus(), Pauli::Y), ket_minus(), kExactTolerance));
    const auto s = apply_pauli(tensor(ket0(), ket0()), Qubit::Second, Pauli::X);
    EXPECT_TRUE(states_equal(s, tensor(ket0(), ket1()), kExactTolerance));
}

TEST(Qsim, DepolarizeErrorRate) {
    // p = 0.75 on a Z eigenstate: X and Y flip the Z outcome, Z does not, so 0.75 * 2/3.
    const double p = 0.75;
    const double expected = p * 2.0 / 3.0;
    EXPECT_DOUBLE_EQ(expected, 0.5);
    RandomSource rng(8);
    const auto s = tensor(ket0(), ket0());
    const int n = 100000;
    int flips = 0;
    for (int i = 0; i < n; ++i) {
        const auto noisy = depolarize(s, Qubit::First, p, rng);
        flips += measure_qubit(noisy, Qubit::First, Basis::Z, rng).outcome;
    }
    EXPECT_LT(std::abs(flips - n * expected), 4 * std::sqrt(n * expected * (1 - expected)));
}

TEST(Qsim, DepolarizeEdgeCases) {
    RandomSource rng(2);
    const auto s = tensor(ket_plus(), ket1());
    for (int i = 0; i < 50; ++i) EXPECT_TRUE(states_equal(depolarize(s, Qubit::First, 0.0, rng), s, kExactTolerance));
    EXPECT_THROW(depolarize(s, Qubit::First, -0.1, rng), std::invalid_argument);
    EXPECT_THROW(depolarize(ket0(), 1.5, rng), std::invalid_argument);
}
