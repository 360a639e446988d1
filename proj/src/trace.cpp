#include <array>
#include <sstream>
#include <string>

#include "qkdpair/analysis.hpp"

namespace qkd::analysis {

char state_symbol(Basis basis, qsim::Outcome outcome) noexcept {
    if (basis == Basis::Z) return outcome ? '1' : '0';
    return outcome ? '+' : '-';
}

std::vector<TraceColumn> trace_columns(std::span<const protocol::AliceRound> alice,
                                       std::span<const protocol::BobRound> bob, bool kept_only) {
    if (alice.size() != bob.size())
        throw protocol::ProtocolError("trace: " + std::to_string(alice.size()) + " Alice rounds vs " +
                                      std::to_string(bob.size()) + " Bob rounds");
    std::vector<TraceColumn> cols;
    for (std::size_t i = 0; i < alice.size(); ++i) {
        const auto& a = alice[i];
        const auto& b = bob[i];
        if (a.round_id != b.round_id)
            throw protocol::ProtocolError("trace: round " + std::to_string(a.round_id) + " paired with round " +
                                          std::to_string(b.round_id));
        if (kept_only && a.basis() != b.secure_basis) continue;
        TraceColumn c;
        c.round_id = a.round_id;
        c.basis = a.basis();
        c.alice_bit = a.key_bit();
        c.secure_state = state_symbol(b.secure_basis, b.secure_outcome);
        c.secure_bit = b.secure_bit;
        c.aux_state = state_symbol(Basis::X, b.aux_outcome);
        c.aux_bit = b.aux_bit;
        c.combined = b.secure_bit ^ b.aux_bit;
        cols.push_back(c);
    }
    return cols;
}

std::string format_trace_table(std::span<const TraceColumn> cols) {
    static constexpr std::array<const char*, 7> kRows = {
        "Basis",           "Alice key bit",       "Bob secure state",  "Bob secure key bit",
        "Bob auxiliary state", "Bob auxiliary bit", "Bob secure + auxil",
    };
    constexpr std::size_t kLabelWidth = 20;

    auto cell = [](const TraceColumn& c, std::size_t row) -> char {
        switch (row) {
            case 0: return c.basis == Basis::Z ? 'z' : 'x';
            case 1: return char('0' + c.alice_bit);
            case 2: return c.secure_state;
            case 3: return char('0' + c.secure_bit);
            case 4: return c.aux_state;
            case 5: return char('0' + c.aux_bit);
            default: return char('0' + c.combined);
        }
    };

    std::string out;
    for (std::size_t row = 0; row < kRows.size(); ++row) {
        std::string line = kRows[row];
        line.resize(kLabelWidth, ' ');
        for (const auto& c : cols) {
            line.push_back(' ');
            line.push_back(cell(c, row));
        }
        out += line;
        out.push_back('\n');
    }
    return out;
}

std::string format_trace_csv(std::span<const TraceColumn> cols) {
    std::ostringstream out;
    out << "round_id,basis,alice_key_bit,bob_secure_state,bob_secure_key_bit,bob_auxiliary_state,"
           "bob_auxiliary_bit,bob_secure_plus_auxiliary\n";
    for (const auto& c : cols) {
        out << c.round_id << ',' << (c.basis == Basis::Z ? 'z' : 'x') << ',' << int(c.alice_bit) << ','
            << c.secure_state << ',' << int(c.secure_bit) << ',' << c.aux_state << ',' << int(c.aux_bit) << ','
            << int(c.combined) << '\n';
    }
    return out.str();
}

}  // namespace qkd::analysis
