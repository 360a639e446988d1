#pragma once

// Newline-delimited JSON messages exchanged between Alice, Bob and the
// channel daemon. Every message carries "type" and "protocol_version".
//
//   HELLO          {role, rounds?}                 rounds: Alice -> channel, channel -> peers
//   PREPARE        {round_id, label}               Alice -> channel
//   MEASURE        {round_id, secure_qubit, secure_basis}   Bob -> channel
//   RESULT         {round_id, secure_outcome, aux_outcome}  channel -> Bob
//   BASIS_ANNOUNCE {bases}                         Bob -> Alice, then Alice -> Bob (relayed)
//   SAMPLE_DISCLOSE{indices, bits}                 Alice -> Bob (relayed)
//   VERDICT        {verdict, qber}                 Bob -> Alice (relayed)
//   ERROR          {code, message}

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "qkdpair/protocol.hpp"

namespace qkd::wire {

using Message = nlohmann::json;

inline constexpr int kProtocolVersion = 1;

namespace code {
inline constexpr std::string_view kMalformed = "malformed";
inline constexpr std::string_view kUnknownType = "unknown_type";
inline constexpr std::string_view kBadField = "bad_field";
inline constexpr std::string_view kVersion = "unsupported_version";
inline constexpr std::string_view kOutOfOrder = "out_of_order";
inline constexpr std::string_view kDoubleConnection = "double_connection";
inline constexpr std::string_view kProtocolViolation = "protocol_violation";
inline constexpr std::string_view kPeerAborted = "peer_aborted";
inline constexpr std::string_view kTimeout = "timeout";
}  // namespace code

class WireError : public std::runtime_error {
public:
    WireError(std::string_view code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

enum class Role : std::uint8_t { Alice, Bob, Channel };

std::string_view role_name(Role r) noexcept;

Message hello(Role role, std::optional<std::uint64_t> rounds = std::nullopt);
Message prepare(protocol::RoundId id, protocol::PairLabel label);
Message measure(protocol::RoundId id, protocol::BobChoice choice);
Message result(protocol::RoundId id, qsim::Outcome secure_outcome, qsim::Outcome aux_outcome);
Message basis_announce(std::span<const qsim::Basis> bases);
Message sample_disclose(std::span<const std::size_t> indices, std::span<const protocol::Bit> bits);
Message verdict(protocol::Verdict v, double qber);
Message error(std::string_view code, std::string_view message);

// Checks type, version and the exact field set; throws WireError.
void validate(const Message& m);

// Parse one line and validate it.
Message decode(std::string_view line);
std::string encode(const Message& m);

const std::string& type_of(const Message& m);

// Typed accessors; callers validate first.
protocol::PairLabel label_of(const Message& m);
protocol::BobChoice choice_of(const Message& m);
std::vector<qsim::Basis> bases_of(const Message& m);

}  // namespace qkd::wire
