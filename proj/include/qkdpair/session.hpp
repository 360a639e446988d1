#pragma once

// Peer mode: Alice, Bob and a channel daemon as separate processes. The
// daemon owns every quantum state; Eve and the noise model live inside it.
// Public messages (basis announcements, sample disclosure, verdict) are
// relayed through the daemon's bus, where Eve can read them.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qkdpair/adversary.hpp"
#include "qkdpair/net.hpp"
#include "qkdpair/protocol.hpp"
#include "qkdpair/wire.hpp"

namespace qkd::session {

using protocol::KeyBits;
using protocol::Verdict;

class SessionError : public std::runtime_error {
public:
    SessionError(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

enum class Direction : std::uint8_t { Sent, Received };

struct TranscriptEntry {
    Direction direction;
    wire::Message message;
    std::uint64_t timestamp;  // logical clock, one tick per message
};

struct SessionTranscript {
    std::vector<TranscriptEntry> entries;

    void record(Direction d, const wire::Message& m) { entries.push_back({d, m, entries.size()}); }
};

nlohmann::json to_json(const SessionTranscript& t);
SessionTranscript transcript_from_json(const nlohmann::json& j);

inline constexpr std::chrono::milliseconds kDefaultTimeout{30000};

// The daemon keeps one table row per round.
inline constexpr std::uint64_t kMaxPeerRounds = 1u << 24;

struct ChannelConfig {
    net::Endpoint listen;
    adversary::EveStrategy eve{};
    double noise_p = 0.0;
    std::uint64_t seed = 1;
    std::chrono::milliseconds idle_timeout = kDefaultTimeout;
    // Called once the listener is bound, with the actual port.
    std::function<void(const net::Endpoint&)> on_listening;
};

struct ChannelReport {
    int exit_status = 0;  // 0 complete, 1 aborted
    std::uint64_t rounds = 0;
    std::vector<adversary::EveRecord> eve_records;  // after the public announcement
    std::string error;
};

// Serves exactly one session and returns when it completes or aborts.
ChannelReport run_channel_daemon(const ChannelConfig& config);

struct AliceConfig {
    net::Endpoint connect;
    std::uint64_t rounds = 1000;
    std::uint64_t seed = 1;
    double verify_fraction = protocol::kDefaultVerifyFraction;
    std::chrono::milliseconds timeout = kDefaultTimeout;
};

struct BobConfig {
    net::Endpoint connect;
    std::uint64_t seed = 1;
    double qber_threshold = protocol::kNoiselessThreshold;
    std::chrono::milliseconds timeout = kDefaultTimeout;
};

struct PeerOutcome {
    Verdict verdict = Verdict::Clean;
    double qber_estimate = 0.0;
    std::uint64_t rounds = 0;
    std::uint64_t sifted_bits = 0;
    std::optional<KeyBits> final_key;  // absent when Suspect
    SessionTranscript transcript;
};

// Both throw SessionError on a protocol violation or an ERROR from the
// channel, and net::NetError when the daemon cannot be reached.
PeerOutcome run_alice_peer(const AliceConfig& config);
PeerOutcome run_bob_peer(const BobConfig& config);

// Problems found in one peer's transcript; empty when nothing private leaked.
// Flags labels, role choices and amplitude-like values in any message the
// peer received or published, and quantum-link messages on the wrong side.
std::vector<std::string> scan_transcript(const SessionTranscript& t, wire::Role owner);

struct ReplayResult {
    Verdict verdict = Verdict::Clean;
    KeyBits alice_key;
    KeyBits bob_key;
};

// Rebuilds both final keys from the two transcripts using the in-process
// protocol operations.
ReplayResult replay_transcripts(const SessionTranscript& alice, const SessionTranscript& bob, double qber_threshold);

}  // namespace qkd::session
