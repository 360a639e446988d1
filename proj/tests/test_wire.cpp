#include <gtest/gtest.h>

#include "qkdpair/wire.hpp"

using namespace qkd;
using namespace qkd::wire;

namespace {

std::string code_of(const std::string& line) {
    try {
        decode(line);
    } catch (const WireError& e) {
        return e.code();
    }
    return "";
}

}  // namespace

TEST(Wire, BuildersRoundTrip) {
    const std::vector<qsim::Basis> bases = {qsim::Basis::Z, qsim::Basis::X};
    const std::vector<std::size_t> idx = {0, 4};
    const std::vector<protocol::Bit> bits = {1, 0};
    const Message msgs[] = {
        hello(Role::Alice, 10),
        hello(Role::Bob),
        prepare(3, protocol::PairLabel::XPhiMinus),
        measure(3, {qsim::Qubit::Second, qsim::Basis::X}),
        result(3, 1, 0),
        basis_announce(bases),
        sample_disclose(idx, bits),
        verdict(protocol::Verdict::Suspect, 0.25),
        error(code::kOutOfOrder, "round 5, expected 4"),
    };
    for (const auto& m : msgs) {
        const auto line = encode(m);
        EXPECT_EQ(line.find('\n'), std::string::npos);
        EXPECT_EQ(decode(line), m);
        EXPECT_EQ(m.at("protocol_version"), kProtocolVersion);
    }
    EXPECT_EQ(label_of(msgs[2]), protocol::PairLabel::XPhiMinus);
    EXPECT_EQ(choice_of(msgs[3]).secure_qubit, qsim::Qubit::Second);
    EXPECT_EQ(choice_of(msgs[3]).secure_basis, qsim::Basis::X);
    EXPECT_EQ(bases_of(msgs[5]), bases);
    EXPECT_EQ(encode(msgs[4]), R"({"aux_outcome":0,"protocol_version":1,"round_id":3,"secure_outcome":1,"type":"RESULT"})");
}

TEST(Wire, RejectsBadMessages) {
    EXPECT_EQ(code_of("{not json"), code::kMalformed);
    EXPECT_EQ(code_of("[1,2]"), code::kMalformed);
    EXPECT_EQ(code_of(R"({"protocol_version":1})"), code::kMalformed);
    EXPECT_EQ(code_of(R"({"type":"PING","protocol_version":1})"), code::kUnknownType);
    EXPECT_EQ(code_of(R"({"type":"HELLO","role":"alice"})"), code::kMalformed);
    EXPECT_EQ(code_of(R"({"type":"HELLO","role":"alice","protocol_version":2})"), code::kVersion);
    EXPECT_EQ(code_of(R"({"type":"HELLO","role":"eve","protocol_version":1})"), code::kBadField);
    EXPECT_EQ(code_of(R"({"type":"PREPARE","round_id":1,"label":"Z2","protocol_version":1})"), code::kBadField);
    EXPECT_EQ(code_of(R"({"type":"PREPARE","round_id":-1,"label":"Z1","protocol_version":1})"), code::kBadField);
    EXPECT_EQ(code_of(R"({"type":"PREPARE","round_id":1.5,"label":"Z1","protocol_version":1})"), code::kBadField);
    EXPECT_EQ(code_of(R"({"type":"MEASURE","round_id":1,"secure_qubit":3,"secure_basis":"Z","protocol_version":1})"),
              code::kBadField);
    EXPECT_EQ(code_of(R"({"type":"RESULT","round_id":1,"secure_outcome":2,"aux_outcome":0,"protocol_version":1})"),
              code::kBadField);
    EXPECT_EQ(code_of(R"({"type":"BASIS_ANNOUNCE","bases":"ZXY","protocol_version":1})"), code::kBadField);
    EXPECT_EQ(code_of(R"({"type":"SAMPLE_DISCLOSE","indices":[1,2],"bits":[1],"protocol_version":1})"),
              code::kBadField);
    EXPECT_EQ(code_of(R"({"type":"VERDICT","verdict":"clean","qber":1.5,"protocol_version":1})"), code::kBadField);
    // Extra fields are refused so nothing rides along unnoticed.
    EXPECT_EQ(code_of(R"({"type":"RESULT","round_id":1,"secure_outcome":1,"aux_outcome":0,"label":"Z1","protocol_version":1})"),
              code::kBadField);
}
