#pragma once

// Monte Carlo experiment runner, exact branch-enumeration oracle, and the
// Table-style trace formatter.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "qkdpair/adversary.hpp"
#include "qkdpair/protocol.hpp"

namespace qkd::analysis {

using adversary::EveRecord;
using adversary::EveStrategy;
using protocol::Bit;
using protocol::KeyBits;
using protocol::RoundId;
using protocol::Verdict;
using qsim::Basis;

enum class ProtocolKind : std::uint8_t { Pair, BB84 };

std::string_view protocol_name(ProtocolKind p) noexcept;  // "pair" / "bb84"
ProtocolKind parse_protocol(std::string_view s);

// 0.0 on a noiseless channel, the usual 11% abort bound otherwise.
double default_threshold(double noise_p) noexcept;

struct ExperimentConfig {
    ProtocolKind protocol = ProtocolKind::Pair;
    std::uint64_t rounds = 10000;
    std::uint64_t seed = 1;
    EveStrategy eve{};
    double noise_p = 0.0;
    double verify_fraction = protocol::kDefaultVerifyFraction;
    double qber_threshold = protocol::kNoiselessThreshold;

    // Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

struct ExperimentStats {
    std::uint64_t rounds_sent = 0;
    std::uint64_t rounds_kept = 0;
    double sift_rate = 0.0;
    double qber_final = 0.0;   // Alice key vs Bob's combined key, all kept rounds
    double qber_sifted = 0.0;  // Alice key vs Bob's secure key before combination
    std::optional<double> eve_secure_agreement;  // Eve's final-key guess vs Alice
    std::optional<double> eve_aux_agreement;     // Eve's auxiliary guess vs Bob
    std::uint64_t eve_secure_samples = 0;        // kept rounds where Eve had a key guess
    std::uint64_t eve_aux_samples = 0;
    Verdict verdict = Verdict::Clean;
    double wilson_ci_halfwidth = 0.0;  // 95% on qber_final
    std::uint64_t disclosed_bits = 0;
    double qber_estimate = 0.0;  // on the disclosed sample
    std::uint64_t final_key_bits = 0;
    std::string alice_key_sha256;  // empty when Suspect
    std::string bob_key_sha256;

    bool operator==(const ExperimentStats&) const = default;
};

nlohmann::ordered_json to_json(const ExperimentStats& s);

// Everything one run produces: per-round records on each side, the sift, the
// verification outcome and the final keys.
struct ExperimentRun {
    ExperimentConfig config;
    std::vector<protocol::AliceRound> alice;
    std::vector<protocol::BobRound> bob;
    std::vector<protocol::Bb84AliceRound> bb84_alice;
    std::vector<protocol::Bb84BobRound> bb84_bob;
    std::vector<EveRecord> eve;  // after the public announcement
    protocol::SiftResult sift;
    KeyBits bob_combined;
    std::optional<protocol::VerificationReport> verification;  // empty when nothing was kept
    KeyBits alice_final_key;
    KeyBits bob_final_key;
    ExperimentStats stats;
};

// Round r of party P draws from RandomSource::for_stream(seed, P, r); rounds
// are sharded across worker threads and the result does not depend on the
// shard layout. Sample selection draws from stream AliceSample, index 0.
ExperimentRun run_pipeline(const ExperimentConfig& config, protocol::BobDecoder decoder = &protocol::decode_bob);

ExperimentStats run_experiment(const ExperimentConfig& config);

ExperimentStats summarize(const ExperimentRun& run);

// --- exact oracle -----------------------------------------------------------

struct OracleConfig {
    ProtocolKind protocol = ProtocolKind::Pair;
    EveStrategy eve{};
    double noise_p = 0.0;
};

struct OutcomeKey {
    bool kept = false;
    Basis alice_basis = Basis::Z;
    Bit alice_bit = 0;
    Bit bob_secure_bit = 0;
    Bit bob_aux_bit = 0;
    Bit bob_final_bit = 0;
    std::optional<Bit> eve_key_guess;
    std::optional<Bit> eve_aux_guess;

    auto operator<=>(const OutcomeKey&) const = default;
};

struct ExactDistribution {
    OracleConfig config;
    std::map<OutcomeKey, double> entries;

    double total() const;
};

struct OracleMarginals {
    double total_probability = 0.0;
    double sift_rate = 0.0;
    double qber_final = 0.0;
    double qber_sifted = 0.0;
    std::optional<double> eve_secure_agreement;
    std::optional<double> eve_aux_agreement;
    double eve_secure_coverage = 0.0;  // P(Eve has a key guess | kept)
    double eve_aux_coverage = 0.0;
};

// Exhausts Alice's preparations, Bob's role and basis, Eve's choices, the
// Pauli noise branches and every measurement outcome. Throws
// std::invalid_argument for unsupported combinations (role-oracle on BB84).
ExactDistribution enumerate_exact(const OracleConfig& config);

OracleMarginals marginals(const ExactDistribution& dist);

nlohmann::ordered_json to_json(const OracleConfig& config, const OracleMarginals& m);

// --- statistics helpers -----------------------------------------------------

inline constexpr double kZ95 = 1.959963984540054;

double binomial_sigma(double p, std::uint64_t n) noexcept;
double wilson_halfwidth(double p_hat, std::uint64_t n, double z = kZ95) noexcept;

// P(mismatches / k > threshold) for k disclosed bits each wrong with
// probability qber.
double detection_probability(double qber, std::uint64_t disclosed, double threshold);

struct MarginalCheck {
    std::string name;
    double oracle = 0.0;
    double observed = 0.0;
    std::uint64_t samples = 0;
    double sigma = 0.0;
    bool within = false;
};

struct OracleMatch {
    bool passed = false;
    std::vector<MarginalCheck> checks;
};

OracleMatch compare_to_oracle(const ExperimentStats& stats, const OracleMarginals& oracle, double sigma_budget);

// Runs the pipeline with `n_rounds` rounds and checks every marginal against
// the oracle at `sigma_budget` binomial standard deviations. A zero-variance
// oracle value must be matched exactly.
OracleMatch montecarlo_matches_oracle(const ExperimentConfig& config, std::uint64_t n_rounds, double sigma_budget,
                                      protocol::BobDecoder decoder = &protocol::decode_bob);

// --- keys -------------------------------------------------------------------

// SHA-256 over the bits packed MSB-first (zero padded), lowercase hex.
std::string key_digest_hex(std::span<const Bit> key);
std::string key_bit_string(std::span<const Bit> key);

// --- trace ------------------------------------------------------------------

struct TraceColumn {
    RoundId round_id = 0;
    Basis basis = Basis::Z;
    Bit alice_bit = 0;
    char secure_state = '0';
    Bit secure_bit = 0;
    char aux_state = '+';
    Bit aux_bit = 0;
    Bit combined = 0;
};

// '0'/'1' for Z outcomes, '+'/'-' for X outcomes.
char state_symbol(Basis basis, qsim::Outcome outcome) noexcept;

std::vector<TraceColumn> trace_columns(std::span<const protocol::AliceRound> alice,
                                       std::span<const protocol::BobRound> bob, bool kept_only);

// Seven labelled rows, one column per round.
std::string format_trace_table(std::span<const TraceColumn> cols);

// Header "round_id,basis,alice_key_bit,bob_secure_state,bob_secure_key_bit,
// bob_auxiliary_state,bob_auxiliary_bit,bob_secure_plus_auxiliary", then one
// line per round.
std::string format_trace_csv(std::span<const TraceColumn> cols);

}  // namespace qkd::analysis
