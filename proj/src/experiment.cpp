#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <openssl/evp.h>

#include "qkdpair/analysis.hpp"

namespace qkd::analysis {
namespace {

constexpr std::uint64_t kRoundsPerShard = 8192;

// Runs body(begin, end) over [0, n) in contiguous shards.
template <typename Body>
void parallel_rounds(std::uint64_t n, Body body) {
    const std::uint64_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::uint64_t shards = std::clamp<std::uint64_t>(n / kRoundsPerShard, 1, hw);
    if (shards == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(shards);
    const std::uint64_t step = (n + shards - 1) / shards;
    for (std::uint64_t s = 0; s < shards; ++s) {
        const std::uint64_t begin = s * step;
        const std::uint64_t end = std::min(n, begin + step);
        if (begin >= end) break;
        workers.emplace_back([=] { body(begin, end); });
    }
    for (auto& w : workers) w.join();
}

std::size_t count_mismatches(std::span<const Bit> a, std::span<const Bit> b) {
    std::size_t m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m += a[i] != b[i];
    return m;
}

void run_pair_rounds(ExperimentRun& run, protocol::BobDecoder decoder) {
    const auto& cfg = run.config;
    run.alice.resize(cfg.rounds);
    run.bob.resize(cfg.rounds);
    run.eve.resize(cfg.rounds);
    parallel_rounds(cfg.rounds, [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t i = begin; i < end; ++i) {
            const RoundId r = i + 1;
            auto alice_rng = RandomSource::for_stream(cfg.seed, Stream::Alice, r);
            auto bob_rng = RandomSource::for_stream(cfg.seed, Stream::Bob, r);
            auto channel = RandomSource::for_stream(cfg.seed, Stream::Channel, r);

            auto [alice, state] = protocol::alice_emit(alice_rng, r);
            const auto choice = protocol::bob_choose(bob_rng);
            const auto hint = adversary::needs_role_hint(cfg.eve) ? std::optional(choice.secure_qubit) : std::nullopt;
            auto [arrived, eve] = adversary::transit_pair(state, cfg.eve, hint, cfg.noise_p, channel, r);
            run.bob[i] = protocol::bob_measure_pair(arrived, choice, channel, r, decoder);
            run.alice[i] = alice;
            run.eve[i] = eve;
        }
    });
    for (std::size_t i = 0; i < run.eve.size(); ++i) adversary::apply_announcement(run.eve[i], run.alice[i].basis());
    run.sift = protocol::sift(run.alice, run.bob);
}

void run_bb84_rounds(ExperimentRun& run) {
    const auto& cfg = run.config;
    run.bb84_alice.resize(cfg.rounds);
    run.bb84_bob.resize(cfg.rounds);
    run.eve.resize(cfg.rounds);
    parallel_rounds(cfg.rounds, [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t i = begin; i < end; ++i) {
            const RoundId r = i + 1;
            auto alice_rng = RandomSource::for_stream(cfg.seed, Stream::Alice, r);
            auto bob_rng = RandomSource::for_stream(cfg.seed, Stream::Bob, r);
            auto channel = RandomSource::for_stream(cfg.seed, Stream::Channel, r);

            auto [alice, state] = protocol::bb84_alice_emit(alice_rng, r);
            const Basis basis = protocol::bb84_bob_choose(bob_rng);
            auto [arrived, eve] = adversary::transit_single(state, cfg.eve, cfg.noise_p, channel, r);
            run.bb84_bob[i] = protocol::bb84_bob_measure(arrived, basis, channel, r);
            run.bb84_alice[i] = alice;
            run.eve[i] = eve;
        }
    });
    for (auto& rec : run.eve) adversary::apply_bb84_announcement(rec);
    run.sift = protocol::bb84_sift(run.bb84_alice, run.bb84_bob);
}

}  // namespace

std::string_view protocol_name(ProtocolKind p) noexcept { return p == ProtocolKind::Pair ? "pair" : "bb84"; }

ProtocolKind parse_protocol(std::string_view s) {
    if (s == "pair") return ProtocolKind::Pair;
    if (s == "bb84") return ProtocolKind::BB84;
    throw std::invalid_argument("unknown protocol '" + std::string(s) + "' (expected pair or bb84)");
}

double default_threshold(double noise_p) noexcept {
    return noise_p > 0.0 ? protocol::kNoisyThreshold : protocol::kNoiselessThreshold;
}

void ExperimentConfig::validate() const {
    if (rounds < 1) throw std::invalid_argument("rounds must be at least 1");
    if (!(noise_p >= 0.0 && noise_p <= 1.0)) throw std::invalid_argument("noise_p must lie in [0, 1]");
    if (!(verify_fraction > 0.0 && verify_fraction <= 1.0))
        throw std::invalid_argument("verify_fraction must lie in (0, 1]");
    if (!(qber_threshold >= 0.0 && qber_threshold <= 1.0))
        throw std::invalid_argument("qber_threshold must lie in [0, 1]");
    if (protocol == ProtocolKind::BB84 && eve.kind == adversary::EveKind::RoleOracle)
        throw std::invalid_argument("role-oracle eve is only defined for the pair protocol");
}

ExperimentRun run_pipeline(const ExperimentConfig& config, protocol::BobDecoder decoder) {
    config.validate();
    ExperimentRun run;
    run.config = config;
    if (config.protocol == ProtocolKind::Pair)
        run_pair_rounds(run, decoder);
    else
        run_bb84_rounds(run);

    run.bob_combined = protocol::combine_keys(run.sift.bob_secure_key, run.sift.bob_aux_key);
    if (run.sift.size() > 0) {
        auto sample_rng = RandomSource::for_stream(config.seed, Stream::AliceSample, 0);
        run.verification = protocol::verify_sample(run.sift.alice_key, run.bob_combined, config.verify_fraction,
                                                   config.qber_threshold, sample_rng);
        const auto& pos = run.verification->disclosed_positions;
        run.alice_final_key = protocol::discard_positions(run.sift.alice_key, pos);
        run.bob_final_key = protocol::discard_positions(run.bob_combined, pos);
    }
    run.stats = summarize(run);
    return run;
}

ExperimentStats run_experiment(const ExperimentConfig& config) { return run_pipeline(config).stats; }

ExperimentStats summarize(const ExperimentRun& run) {
    ExperimentStats s;
    const auto& sift = run.sift;
    s.rounds_sent = run.config.rounds;
    s.rounds_kept = sift.size();
    s.sift_rate = s.rounds_sent ? double(s.rounds_kept) / double(s.rounds_sent) : 0.0;
    if (s.rounds_kept > 0) {
        s.qber_final = double(count_mismatches(sift.alice_key, run.bob_combined)) / double(s.rounds_kept);
        s.qber_sifted = double(count_mismatches(sift.alice_key, sift.bob_secure_key)) / double(s.rounds_kept);
    }
    s.wilson_ci_halfwidth = wilson_halfwidth(s.qber_final, s.rounds_kept);

    std::uint64_t key_agree = 0;
    std::uint64_t aux_agree = 0;
    for (std::size_t j = 0; j < sift.size(); ++j) {
        const EveRecord& rec = run.eve[sift.kept_round_ids[j] - 1];
        if (const auto g = adversary::eve_key_guess(rec)) {
            ++s.eve_secure_samples;
            key_agree += *g == sift.alice_key[j];
        }
        if (rec.guessed_aux_bit) {
            ++s.eve_aux_samples;
            aux_agree += *rec.guessed_aux_bit == sift.bob_aux_key[j];
        }
    }
    if (s.eve_secure_samples) s.eve_secure_agreement = double(key_agree) / double(s.eve_secure_samples);
    if (s.eve_aux_samples) s.eve_aux_agreement = double(aux_agree) / double(s.eve_aux_samples);

    if (run.verification) {
        s.verdict = run.verification->verdict;
        s.disclosed_bits = run.verification->disclosed_positions.size();
        s.qber_estimate = run.verification->qber_estimate;
    }
    if (s.verdict == Verdict::Clean) {
        s.final_key_bits = run.alice_final_key.size();
        s.alice_key_sha256 = key_digest_hex(run.alice_final_key);
        s.bob_key_sha256 = key_digest_hex(run.bob_final_key);
    }
    return s;
}

nlohmann::ordered_json to_json(const ExperimentStats& s) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    auto str = [](const std::string& v) { return v.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(v); };
    nlohmann::ordered_json j;
    j["rounds_sent"] = s.rounds_sent;
    j["rounds_kept"] = s.rounds_kept;
    j["sift_rate"] = s.sift_rate;
    j["qber_final"] = s.qber_final;
    j["qber_sifted"] = s.qber_sifted;
    j["eve_secure_agreement"] = opt(s.eve_secure_agreement);
    j["eve_aux_agreement"] = opt(s.eve_aux_agreement);
    j["eve_secure_samples"] = s.eve_secure_samples;
    j["eve_aux_samples"] = s.eve_aux_samples;
    j["verdict"] = std::string(protocol::verdict_name(s.verdict));
    j["wilson_ci_halfwidth"] = s.wilson_ci_halfwidth;
    j["disclosed_bits"] = s.disclosed_bits;
    j["qber_estimate"] = s.qber_estimate;
    j["final_key_bits"] = s.final_key_bits;
    j["alice_key_sha256"] = str(s.alice_key_sha256);
    j["bob_key_sha256"] = str(s.bob_key_sha256);
    return j;
}

double binomial_sigma(double p, std::uint64_t n) noexcept {
    if (n == 0) return 0.0;
    return std::sqrt(std::max(0.0, p * (1.0 - p)) / double(n));
}

double wilson_halfwidth(double p_hat, std::uint64_t n, double z) noexcept {
    if (n == 0) return 0.0;
    const double nn = double(n);
    const double z2 = z * z;
    return z * std::sqrt(p_hat * (1.0 - p_hat) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
}

double detection_probability(double qber, std::uint64_t disclosed, double threshold) {
    if (!(qber >= 0.0 && qber <= 1.0)) throw std::invalid_argument("qber must lie in [0, 1]");
    if (disclosed == 0) return 0.0;
    const double k = double(disclosed);
    double p = 0.0;
    for (std::uint64_t m = 0; m <= disclosed; ++m) {
        if (!(double(m) / k > threshold)) continue;
        double term;
        if (qber == 0.0)
            term = m == 0 ? 1.0 : 0.0;
        else if (qber == 1.0)
            term = m == disclosed ? 1.0 : 0.0;
        else
            term = std::exp(std::lgamma(k + 1) - std::lgamma(double(m) + 1) - std::lgamma(k - double(m) + 1) +
                            double(m) * std::log(qber) + (k - double(m)) * std::log1p(-qber));
        p += term;
    }
    return std::min(1.0, p);
}

namespace {

MarginalCheck check(std::string name, double oracle, double observed, std::uint64_t n, double budget) {
    MarginalCheck c{std::move(name), oracle, observed, n, binomial_sigma(oracle, n), false};
    if (n == 0)
        c.within = false;
    else if (c.sigma == 0.0)
        c.within = std::abs(observed - oracle) <= 1e-12;
    else
        c.within = std::abs(observed - oracle) <= budget * c.sigma;
    return c;
}

MarginalCheck presence_check(std::string name, bool oracle_present, bool observed_present) {
    MarginalCheck c;
    c.name = std::move(name);
    c.oracle = oracle_present ? 1.0 : 0.0;
    c.observed = observed_present ? 1.0 : 0.0;
    c.within = oracle_present == observed_present;
    return c;
}

}  // namespace

OracleMatch compare_to_oracle(const ExperimentStats& s, const OracleMarginals& o, double budget) {
    OracleMatch m;
    m.checks.push_back(check("sift_rate", o.sift_rate, s.sift_rate, s.rounds_sent, budget));
    m.checks.push_back(check("qber_final", o.qber_final, s.qber_final, s.rounds_kept, budget));
    m.checks.push_back(check("qber_sifted", o.qber_sifted, s.qber_sifted, s.rounds_kept, budget));

    const double kept = s.rounds_kept ? double(s.rounds_kept) : 1.0;
    m.checks.push_back(check("eve_secure_coverage", o.eve_secure_coverage, double(s.eve_secure_samples) / kept,
                             s.rounds_kept, budget));
    m.checks.push_back(
        check("eve_aux_coverage", o.eve_aux_coverage, double(s.eve_aux_samples) / kept, s.rounds_kept, budget));

    if (o.eve_secure_agreement && s.eve_secure_agreement)
        m.checks.push_back(check("eve_secure_agreement", *o.eve_secure_agreement, *s.eve_secure_agreement,
                                 s.eve_secure_samples, budget));
    else
        m.checks.push_back(presence_check("eve_secure_agreement", o.eve_secure_agreement.has_value(),
                                          s.eve_secure_agreement.has_value()));
    if (o.eve_aux_agreement && s.eve_aux_agreement)
        m.checks.push_back(
            check("eve_aux_agreement", *o.eve_aux_agreement, *s.eve_aux_agreement, s.eve_aux_samples, budget));
    else
        m.checks.push_back(presence_check("eve_aux_agreement", o.eve_aux_agreement.has_value(),
                                          s.eve_aux_agreement.has_value()));

    m.passed = std::all_of(m.checks.begin(), m.checks.end(), [](const MarginalCheck& c) { return c.within; });
    return m;
}

OracleMatch montecarlo_matches_oracle(const ExperimentConfig& config, std::uint64_t n_rounds, double sigma_budget,
                                      protocol::BobDecoder decoder) {
    ExperimentConfig cfg = config;
    cfg.rounds = n_rounds;
    const auto oracle = marginals(enumerate_exact({cfg.protocol, cfg.eve, cfg.noise_p}));
    const auto run = run_pipeline(cfg, decoder);
    return compare_to_oracle(run.stats, oracle, sigma_budget);
}

std::string key_digest_hex(std::span<const Bit> key) {
    std::vector<unsigned char> packed((key.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < key.size(); ++i)
        if (key[i]) packed[i / 8] |= static_cast<unsigned char>(0x80u >> (i % 8));

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(packed.data(), packed.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<unsigned>(digest[i]);
    return out.str();
}

std::string key_bit_string(std::span<const Bit> key) {
    std::string s;
    s.reserve(key.size());
    for (Bit b : key) s.push_back(b ? '1' : '0');
    return s;
}

}  // namespace qkd::analysis
