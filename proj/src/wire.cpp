#include "qkdpair/wire.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace qkd::wire {
namespace {

enum class Kind { UInt, Bit, Qubit, BasisChar, BasisString, Label, RoleName, VerdictName, Real, Text, UIntList, BitList };

struct FieldSpec {
    std::string name;
    Kind kind;
    bool required = true;
};

const std::map<std::string, std::vector<FieldSpec>, std::less<>>& schema() {
    static const std::map<std::string, std::vector<FieldSpec>, std::less<>> s = {
        {"HELLO", {{"role", Kind::RoleName}, {"rounds", Kind::UInt, false}}},
        {"PREPARE", {{"round_id", Kind::UInt}, {"label", Kind::Label}}},
        {"MEASURE", {{"round_id", Kind::UInt}, {"secure_qubit", Kind::Qubit}, {"secure_basis", Kind::BasisChar}}},
        {"RESULT", {{"round_id", Kind::UInt}, {"secure_outcome", Kind::Bit}, {"aux_outcome", Kind::Bit}}},
        {"BASIS_ANNOUNCE", {{"bases", Kind::BasisString}}},
        {"SAMPLE_DISCLOSE", {{"indices", Kind::UIntList}, {"bits", Kind::BitList}}},
        {"VERDICT", {{"verdict", Kind::VerdictName}, {"qber", Kind::Real}}},
        {"ERROR", {{"code", Kind::Text}, {"message", Kind::Text}}},
    };
    return s;
}

bool is_uint(const Message& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

bool is_bit(const Message& v) { return is_uint(v) && v.get<std::uint64_t>() <= 1; }

bool matches(const Message& v, Kind kind) {
    switch (kind) {
        case Kind::UInt: return is_uint(v);
        case Kind::Bit: return is_bit(v);
        case Kind::Qubit: return is_uint(v) && (v.get<std::uint64_t>() == 1 || v.get<std::uint64_t>() == 2);
        case Kind::BasisChar: return v.is_string() && (v == "Z" || v == "X");
        case Kind::BasisString:
            return v.is_string() &&
                   v.get_ref<const std::string&>().find_first_not_of("ZX") == std::string::npos;
        case Kind::Label:
            if (!v.is_string()) return false;
            for (auto l : protocol::kAllLabels)
                if (v == protocol::label_name(l)) return true;
            return false;
        case Kind::RoleName: return v.is_string() && (v == "alice" || v == "bob" || v == "channel");
        case Kind::VerdictName: return v.is_string() && (v == "clean" || v == "suspect");
        case Kind::Real: return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0;
        case Kind::Text: return v.is_string();
        case Kind::UIntList:
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const Message& x) { return is_uint(x); });
        case Kind::BitList: return v.is_array() && std::all_of(v.begin(), v.end(), is_bit);
    }
    return false;
}

Message base(std::string_view type) {
    Message m = Message::object();
    m["type"] = std::string(type);
    m["protocol_version"] = kProtocolVersion;
    return m;
}

}  // namespace

std::string_view role_name(Role r) noexcept {
    switch (r) {
        case Role::Alice: return "alice";
        case Role::Bob: return "bob";
        case Role::Channel: return "channel";
    }
    return "?";
}

Message hello(Role role, std::optional<std::uint64_t> rounds) {
    Message m = base("HELLO");
    m["role"] = std::string(role_name(role));
    if (rounds) m["rounds"] = *rounds;
    return m;
}

Message prepare(protocol::RoundId id, protocol::PairLabel label) {
    Message m = base("PREPARE");
    m["round_id"] = id;
    m["label"] = std::string(protocol::label_name(label));
    return m;
}

Message measure(protocol::RoundId id, protocol::BobChoice choice) {
    Message m = base("MEASURE");
    m["round_id"] = id;
    m["secure_qubit"] = static_cast<unsigned>(qsim::qubit_number(choice.secure_qubit));
    m["secure_basis"] = std::string(1, qsim::basis_char(choice.secure_basis));
    return m;
}

Message result(protocol::RoundId id, qsim::Outcome secure_outcome, qsim::Outcome aux_outcome) {
    Message m = base("RESULT");
    m["round_id"] = id;
    m["secure_outcome"] = static_cast<unsigned>(secure_outcome);
    m["aux_outcome"] = static_cast<unsigned>(aux_outcome);
    return m;
}

Message basis_announce(std::span<const qsim::Basis> bases) {
    Message m = base("BASIS_ANNOUNCE");
    m["bases"] = protocol::basis_string(bases);
    return m;
}

Message sample_disclose(std::span<const std::size_t> indices, std::span<const protocol::Bit> bits) {
    Message m = base("SAMPLE_DISCLOSE");
    m["indices"] = Message::array();
    for (auto i : indices) m["indices"].push_back(static_cast<std::uint64_t>(i));
    m["bits"] = Message::array();
    for (auto b : bits) m["bits"].push_back(static_cast<unsigned>(b));
    return m;
}

Message verdict(protocol::Verdict v, double qber) {
    Message m = base("VERDICT");
    m["verdict"] = std::string(protocol::verdict_name(v));
    m["qber"] = qber;
    return m;
}

Message error(std::string_view code, std::string_view message) {
    Message m = base("ERROR");
    m["code"] = std::string(code);
    m["message"] = std::string(message);
    return m;
}

void validate(const Message& m) {
    if (!m.is_object()) throw WireError(code::kMalformed, "message is not a JSON object");
    const auto type_it = m.find("type");
    if (type_it == m.end() || !type_it->is_string()) throw WireError(code::kMalformed, "message has no string 'type'");
    const auto& type = type_it->get_ref<const std::string&>();
    const auto spec_it = schema().find(type);
    if (spec_it == schema().end()) throw WireError(code::kUnknownType, "unknown message type '" + type + "'");

    const auto version = m.find("protocol_version");
    if (version == m.end() || !version->is_number_integer())
        throw WireError(code::kMalformed, type + ": missing protocol_version");
    if (version->get<std::int64_t>() != static_cast<std::int64_t>(kProtocolVersion))
        throw WireError(code::kVersion, type + ": unsupported protocol_version " + version->dump());

    std::set<std::string, std::less<>> allowed = {"type", "protocol_version"};
    for (const auto& f : spec_it->second) {
        allowed.insert(f.name);
        const auto it = m.find(f.name);
        if (it == m.end()) {
            if (f.required) throw WireError(code::kBadField, type + ": missing field '" + f.name + "'");
            continue;
        }
        if (!matches(*it, f.kind)) throw WireError(code::kBadField, type + ": invalid field '" + f.name + "'");
    }
    for (const auto& [key, value] : m.items())
        if (!allowed.contains(key)) throw WireError(code::kBadField, type + ": unexpected field '" + key + "'");

    if (type == "SAMPLE_DISCLOSE" && m.at("indices").size() != m.at("bits").size())
        throw WireError(code::kBadField, "SAMPLE_DISCLOSE: indices and bits differ in length");
}

Message decode(std::string_view line) {
    Message m = Message::parse(line, nullptr, /*allow_exceptions=*/false);
    if (m.is_discarded()) throw WireError(code::kMalformed, "malformed JSON line");
    validate(m);
    return m;
}

std::string encode(const Message& m) { return m.dump(); }

const std::string& type_of(const Message& m) { return m.at("type").get_ref<const std::string&>(); }

protocol::PairLabel label_of(const Message& m) {
    return protocol::parse_label(m.at("label").get_ref<const std::string&>());
}

protocol::BobChoice choice_of(const Message& m) {
    protocol::BobChoice c;
    c.secure_qubit = m.at("secure_qubit").get<unsigned>() == 1 ? qsim::Qubit::First : qsim::Qubit::Second;
    c.secure_basis = m.at("secure_basis") == "X" ? qsim::Basis::X : qsim::Basis::Z;
    return c;
}

std::vector<qsim::Basis> bases_of(const Message& m) {
    return protocol::parse_basis_string(m.at("bases").get_ref<const std::string&>());
}

}  // namespace qkd::wire
