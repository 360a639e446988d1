#include "qkdpair/session.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include "qkdpair/random.hpp"

namespace qkd::session {
namespace {

using protocol::AliceRound;
using protocol::BobChoice;
using protocol::BobRound;
using protocol::RoundId;
using qsim::Basis;
using wire::Message;
using wire::Role;
using wire::WireError;

// ---------------------------------------------------------------------------
// Daemon plumbing: reader threads push lines into one queue; the main loop is
// the only owner of session state and the only writer.

struct Event {
    std::size_t conn = 0;
    std::optional<std::string> line;  // empty: EOF or read failure
    std::string failure;
};

class EventQueue {
public:
    void push(Event e) {
        {
            std::lock_guard lock(mu_);
            events_.push_back(std::move(e));
        }
        cv_.notify_one();
    }

    std::optional<Event> pop(std::chrono::milliseconds timeout) {
        std::unique_lock lock(mu_);
        if (!cv_.wait_for(lock, timeout, [&] { return !events_.empty(); })) return std::nullopt;
        Event e = std::move(events_.front());
        events_.pop_front();
        return e;
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Event> events_;
};

struct Connection {
    net::LineStream stream;
    std::optional<Role> role;
    bool open = true;
    std::thread reader;
};

struct PendingRound {
    std::optional<protocol::PairLabel> label;
    std::optional<BobChoice> choice;
};

class Daemon {
public:
    explicit Daemon(const ChannelConfig& cfg) : cfg_(cfg), listener_(net::Listener::bind(cfg.listen)) {}

    ChannelReport run() {
        if (cfg_.on_listening) cfg_.on_listening(listener_.endpoint());
        acceptor_ = std::thread([this] { accept_loop(); });
        try {
            loop();
        } catch (const std::exception& e) {
            abort_session(std::nullopt, wire::code::kProtocolViolation, e.what());
        }
        teardown();
        return std::move(report_);
    }

private:
    void accept_loop() {
        for (;;) {
            net::LineStream s;
            try {
                s = listener_.accept();
            } catch (const net::NetError&) {
                return;  // listener shut down
            }
            std::lock_guard lock(conn_mu_);
            if (stopping_) return;
            const std::size_t id = conns_.size();
            auto c = std::make_unique<Connection>();
            c->stream = std::move(s);
            c->stream.set_receive_timeout(cfg_.idle_timeout);
            Connection* raw = c.get();
            conns_.push_back(std::move(c));
            raw->reader = std::thread([this, id, raw] { read_loop(id, raw->stream); });
        }
    }

    void read_loop(std::size_t id, net::LineStream& stream) {
        for (;;) {
            Event e{id, std::nullopt, ""};
            try {
                e.line = stream.read_line();
            } catch (const net::NetError& err) {
                e.failure = err.what();
            }
            const bool eof = !e.line;
            queue_.push(std::move(e));
            if (eof) return;
        }
    }

    Connection& conn(std::size_t id) {
        std::lock_guard lock(conn_mu_);
        return *conns_.at(id);
    }

    void send(Connection& c, const Message& m) {
        if (!c.open) return;
        try {
            c.stream.write_line(wire::encode(m));
        } catch (const net::NetError&) {
            c.open = false;
        }
    }

    void close(Connection& c) {
        c.open = false;
        c.stream.shutdown();
    }

    Connection* peer(Role r) { return r == Role::Alice ? alice_ : bob_; }

    void abort_session(std::optional<Role> offender, std::string_view code, const std::string& why) {
        report_.exit_status = 1;
        report_.error = std::string(code) + ": " + why;
        for (Role r : {Role::Alice, Role::Bob}) {
            Connection* c = peer(r);
            if (!c) continue;
            if (!offender || *offender == r)
                send(*c, wire::error(code, why));
            else
                send(*c, wire::error(wire::code::kPeerAborted, "peer " + std::string(wire::role_name(*offender)) +
                                                                   " aborted: " + why));
            close(*c);
        }
        done_ = true;
    }

    void loop() {
        while (!done_) {
            auto e = queue_.pop(cfg_.idle_timeout);
            if (!e) {
                abort_session(std::nullopt, wire::code::kTimeout, "no traffic within the idle timeout");
                return;
            }
            Connection& c = conn(e->conn);
            if (!c.open) continue;
            if (!e->line) {
                if (c.role)
                    abort_session(c.role, wire::code::kPeerAborted,
                                  e->failure.empty() ? "connection closed" : e->failure);
                else
                    close(c);
                continue;
            }
            try {
                handle(c, wire::decode(*e->line));
            } catch (const WireError& err) {
                reject(c, err.code(), err.what());
            }
        }
    }

    void reject(Connection& c, std::string_view code, const std::string& why) {
        if (c.role) {
            abort_session(c.role, code, why);
        } else {
            send(c, wire::error(code, why));
            close(c);
        }
    }

    void handle(Connection& c, const Message& m) {
        const std::string& type = wire::type_of(m);
        if (type == "HELLO") return on_hello(c, m);
        if (!c.role) throw WireError(wire::code::kProtocolViolation, type + " before HELLO");
        if (!started_) throw WireError(wire::code::kProtocolViolation, type + " before both peers connected");
        const Role r = *c.role;
        if (type == "PREPARE" && r == Role::Alice) return on_prepare(m);
        if (type == "MEASURE" && r == Role::Bob) return on_measure(m);
        if (type == "BASIS_ANNOUNCE") return on_announce(r, m);
        if (type == "SAMPLE_DISCLOSE" && r == Role::Alice) return on_disclose(m);
        if (type == "VERDICT" && r == Role::Bob) return on_verdict(m);
        if (type == "ERROR") throw WireError(wire::code::kPeerAborted, "peer reported: " + m.at("message").get<std::string>());
        throw WireError(wire::code::kProtocolViolation,
                        type + " is not accepted from " + std::string(wire::role_name(r)));
    }

    void on_hello(Connection& c, const Message& m) {
        if (c.role) throw WireError(wire::code::kProtocolViolation, "repeated HELLO");
        const std::string& name = m.at("role").get_ref<const std::string&>();
        Role r;
        if (name == "alice")
            r = Role::Alice;
        else if (name == "bob")
            r = Role::Bob;
        else
            throw WireError(wire::code::kBadField, "HELLO role must be alice or bob");
        if (peer(r)) throw WireError(wire::code::kDoubleConnection, name + " is already connected");
        if (r == Role::Alice) {
            if (!m.contains("rounds") || m.at("rounds").get<std::uint64_t>() < 1 ||
                m.at("rounds").get<std::uint64_t>() > kMaxPeerRounds)
                throw WireError(wire::code::kBadField,
                                "alice HELLO needs rounds in [1, " + std::to_string(kMaxPeerRounds) + "]");
            rounds_ = m.at("rounds").get<std::uint64_t>();
            alice_ = &c;
        } else {
            if (m.contains("rounds")) throw WireError(wire::code::kBadField, "bob HELLO carries no rounds");
            bob_ = &c;
        }
        c.role = r;
        if (alice_ && bob_) {
            started_ = true;
            table_.resize(rounds_);
            report_.rounds = rounds_;
            report_.eve_records.resize(rounds_);
            const Message h = wire::hello(Role::Channel, rounds_);
            send(*alice_, h);
            send(*bob_, h);
        }
    }

    RoundId checked_round(const Message& m, RoundId expected) const {
        const RoundId id = m.at("round_id").get<RoundId>();
        if (id != expected || id > rounds_)
            throw WireError(wire::code::kOutOfOrder, wire::type_of(m) + " round_id " + std::to_string(id) +
                                                         ", expected " + std::to_string(expected));
        return id;
    }

    void on_prepare(const Message& m) {
        const RoundId id = checked_round(m, prepared_ + 1);
        table_[id - 1].label = wire::label_of(m);
        prepared_ = id;
        advance();
    }

    void on_measure(const Message& m) {
        const RoundId id = checked_round(m, measured_ + 1);
        table_[id - 1].choice = wire::choice_of(m);
        measured_ = id;
        advance();
    }

    // Processes every round for which both halves have arrived, in order.
    void advance() {
        while (processed_ < std::min(prepared_, measured_)) {
            const RoundId r = processed_ + 1;
            PendingRound& p = table_[r - 1];
            auto channel = RandomSource::for_stream(cfg_.seed, Stream::Channel, r);
            const auto state = protocol::pair_state(*p.label);
            const auto hint = adversary::needs_role_hint(cfg_.eve) ? std::optional(p.choice->secure_qubit) : std::nullopt;
            auto [arrived, eve] = adversary::transit_pair(state, cfg_.eve, hint, cfg_.noise_p, channel, r);
            const BobRound b = protocol::bob_measure_pair(arrived, *p.choice, channel, r);
            report_.eve_records[r - 1] = eve;
            processed_ = r;
            send(*bob_, wire::result(r, b.secure_outcome, b.aux_outcome));
        }
    }

    void on_announce(Role r, const Message& m) {
        const auto bases = wire::bases_of(m);
        if (bases.size() != rounds_)
            throw WireError(wire::code::kBadField, "BASIS_ANNOUNCE must list " + std::to_string(rounds_) + " bases");
        if (r == Role::Bob) {
            if (processed_ != rounds_ || bob_announced_)
                throw WireError(wire::code::kProtocolViolation, "bob BASIS_ANNOUNCE out of sequence");
            bob_announced_ = true;
            send(*alice_, m);
            return;
        }
        if (!bob_announced_ || alice_announced_)
            throw WireError(wire::code::kProtocolViolation, "alice BASIS_ANNOUNCE must follow bob's");
        for (std::size_t i = 0; i < rounds_; ++i) {
            if (bases[i] != protocol::basis_of(*table_[i].label))
                throw WireError(wire::code::kProtocolViolation, "alice BASIS_ANNOUNCE disagrees with her preparations");
            adversary::apply_announcement(report_.eve_records[i], bases[i]);
        }
        alice_announced_ = true;
        send(*bob_, m);
    }

    void on_disclose(const Message& m) {
        if (!alice_announced_ || disclosed_)
            throw WireError(wire::code::kProtocolViolation, "SAMPLE_DISCLOSE out of sequence");
        disclosed_ = true;
        send(*bob_, m);
    }

    void on_verdict(const Message& m) {
        if (!disclosed_) throw WireError(wire::code::kProtocolViolation, "VERDICT before SAMPLE_DISCLOSE");
        send(*alice_, m);
        close(*alice_);
        close(*bob_);
        done_ = true;
    }

    void teardown() {
        {
            std::lock_guard lock(conn_mu_);
            stopping_ = true;
        }
        listener_.shutdown();
        acceptor_.join();
        std::lock_guard lock(conn_mu_);
        for (auto& c : conns_) {
            c->stream.shutdown();
            if (c->reader.joinable()) c->reader.join();
        }
    }

    const ChannelConfig& cfg_;
    net::Listener listener_;
    EventQueue queue_;
    std::thread acceptor_;
    std::mutex conn_mu_;
    std::vector<std::unique_ptr<Connection>> conns_;
    bool stopping_ = false;

    Connection* alice_ = nullptr;
    Connection* bob_ = nullptr;
    bool started_ = false;
    bool done_ = false;
    std::uint64_t rounds_ = 0;
    std::vector<PendingRound> table_;
    RoundId prepared_ = 0;
    RoundId measured_ = 0;
    RoundId processed_ = 0;
    bool bob_announced_ = false;
    bool alice_announced_ = false;
    bool disclosed_ = false;
    ChannelReport report_;
};

// ---------------------------------------------------------------------------
// Peers: single-threaded request/response over one connection.

class PeerLink {
public:
    PeerLink(const net::Endpoint& ep, std::chrono::milliseconds timeout, SessionTranscript& t)
        : stream_(net::connect_to(ep)), transcript_(t) {
        stream_.set_receive_timeout(timeout);
    }

    void send(const Message& m) {
        transcript_.record(Direction::Sent, m);
        stream_.write_line(wire::encode(m));
    }

    // Next message, which must have the given type. ERROR and EOF abort.
    Message expect(std::string_view type) {
        std::optional<std::string> line;
        try {
            line = stream_.read_line();
        } catch (const net::NetError& e) {
            throw SessionError(std::string(wire::code::kTimeout), std::string("while waiting for ") +
                                                                      std::string(type) + ": " + e.what());
        }
        if (!line)
            throw SessionError(std::string(wire::code::kPeerAborted),
                               "channel closed while waiting for " + std::string(type));
        Message m;
        try {
            m = wire::decode(*line);
        } catch (const WireError& e) {
            throw SessionError(e.code(), e.what());
        }
        transcript_.record(Direction::Received, m);
        const std::string& got = wire::type_of(m);
        if (got == "ERROR")
            throw SessionError(m.at("code").get<std::string>(), "channel error: " + m.at("message").get<std::string>());
        if (got != type) {
            const std::string why = "expected " + std::string(type) + ", got " + got;
            send(wire::error(wire::code::kProtocolViolation, why));
            throw SessionError(std::string(wire::code::kProtocolViolation), why);
        }
        return m;
    }

    // Fails the session locally after telling the channel why.
    [[noreturn]] void fail(std::string_view code, const std::string& why) {
        send(wire::error(code, why));
        throw SessionError(std::string(code), why);
    }

private:
    net::LineStream stream_;
    SessionTranscript& transcript_;
};

std::uint64_t channel_rounds(const Message& hello) {
    if (hello.at("role") != "channel" || !hello.contains("rounds"))
        throw SessionError(std::string(wire::code::kProtocolViolation), "expected the channel HELLO with rounds");
    return hello.at("rounds").get<std::uint64_t>();
}

std::vector<Basis> checked_bases(PeerLink& link, const Message& m, std::uint64_t rounds) {
    auto bases = wire::bases_of(m);
    if (bases.size() != rounds) link.fail(wire::code::kBadField, "BASIS_ANNOUNCE has the wrong length");
    return bases;
}

// Alice's sifted key from her rounds and both basis strings.
KeyBits alice_sifted(std::span<const AliceRound> rounds, std::span<const Basis> bob_bases) {
    std::vector<Basis> mine;
    mine.reserve(rounds.size());
    for (const auto& a : rounds) mine.push_back(a.basis());
    KeyBits key;
    for (std::size_t i : protocol::matching_positions(mine, bob_bases)) key.push_back(rounds[i].key_bit());
    return key;
}

// Bob's combined key from his records and Alice's basis string.
KeyBits bob_combined(std::span<const BobRound> rounds, std::span<const Basis> alice_bases) {
    std::vector<Basis> mine;
    mine.reserve(rounds.size());
    for (const auto& b : rounds) mine.push_back(b.secure_basis);
    KeyBits secure, aux;
    for (std::size_t i : protocol::matching_positions(alice_bases, mine)) {
        secure.push_back(rounds[i].secure_bit);
        aux.push_back(rounds[i].aux_bit);
    }
    return protocol::combine_keys(secure, aux);
}

bool ascending_within(std::span<const std::size_t> positions, std::size_t n) {
    for (std::size_t i = 0; i < positions.size(); ++i)
        if (positions[i] >= n || (i > 0 && positions[i] <= positions[i - 1])) return false;
    return true;
}

std::vector<std::size_t> positions_of(const Message& disclose) {
    std::vector<std::size_t> out;
    for (const auto& v : disclose.at("indices")) out.push_back(v.get<std::size_t>());
    return out;
}

KeyBits bits_of(const Message& disclose) {
    KeyBits out;
    for (const auto& v : disclose.at("bits")) out.push_back(v.get<protocol::Bit>());
    return out;
}

Verdict verdict_of(const Message& m) { return m.at("verdict") == "suspect" ? Verdict::Suspect : Verdict::Clean; }

}  // namespace

nlohmann::json to_json(const SessionTranscript& t) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : t.entries)
        out.push_back({{"direction", e.direction == Direction::Sent ? "sent" : "received"},
                       {"timestamp", e.timestamp},
                       {"message", e.message}});
    return out;
}

SessionTranscript transcript_from_json(const nlohmann::json& j) {
    SessionTranscript t;
    for (const auto& e : j) {
        const auto& dir = e.at("direction").get_ref<const std::string&>();
        if (dir != "sent" && dir != "received") throw std::invalid_argument("bad transcript direction '" + dir + "'");
        t.entries.push_back({dir == "sent" ? Direction::Sent : Direction::Received, e.at("message"),
                             e.at("timestamp").get<std::uint64_t>()});
    }
    return t;
}

ChannelReport run_channel_daemon(const ChannelConfig& config) {
    if (!(config.noise_p >= 0.0 && config.noise_p <= 1.0)) throw std::invalid_argument("noise_p must lie in [0, 1]");
    Daemon d(config);
    return d.run();
}

PeerOutcome run_alice_peer(const AliceConfig& config) {
    if (config.rounds < 1 || config.rounds > kMaxPeerRounds)
        throw std::invalid_argument("rounds must lie in [1, " + std::to_string(kMaxPeerRounds) + "]");
    if (!(config.verify_fraction > 0.0 && config.verify_fraction <= 1.0))
        throw std::invalid_argument("verify_fraction must lie in (0, 1]");
    PeerOutcome out;
    PeerLink link(config.connect, config.timeout, out.transcript);

    link.send(wire::hello(Role::Alice, config.rounds));
    out.rounds = channel_rounds(link.expect("HELLO"));
    if (out.rounds != config.rounds) link.fail(wire::code::kProtocolViolation, "channel echoed a different round count");

    std::vector<AliceRound> rounds;
    rounds.reserve(out.rounds);
    std::vector<Basis> bases;
    for (RoundId r = 1; r <= out.rounds; ++r) {
        auto rng = RandomSource::for_stream(config.seed, Stream::Alice, r);
        const AliceRound a = protocol::alice_emit(rng, r).first;
        rounds.push_back(a);
        bases.push_back(a.basis());
        link.send(wire::prepare(r, a.label));
    }

    const auto bob_bases = checked_bases(link, link.expect("BASIS_ANNOUNCE"), out.rounds);
    link.send(wire::basis_announce(bases));

    const KeyBits key = alice_sifted(rounds, bob_bases);
    out.sifted_bits = key.size();
    std::vector<std::size_t> positions;
    KeyBits disclosed;
    if (!key.empty()) {
        auto sample_rng = RandomSource::for_stream(config.seed, Stream::AliceSample, 0);
        positions = protocol::select_sample(key.size(), config.verify_fraction, sample_rng);
        for (std::size_t p : positions) disclosed.push_back(key[p]);
    }
    link.send(wire::sample_disclose(positions, disclosed));

    const Message v = link.expect("VERDICT");
    out.verdict = verdict_of(v);
    out.qber_estimate = v.at("qber").get<double>();
    if (out.verdict == Verdict::Clean) out.final_key = protocol::discard_positions(key, positions);
    return out;
}

PeerOutcome run_bob_peer(const BobConfig& config) {
    if (!(config.qber_threshold >= 0.0 && config.qber_threshold <= 1.0))
        throw std::invalid_argument("qber_threshold must lie in [0, 1]");
    PeerOutcome out;
    PeerLink link(config.connect, config.timeout, out.transcript);

    link.send(wire::hello(Role::Bob));
    out.rounds = channel_rounds(link.expect("HELLO"));

    std::vector<BobRound> rounds;
    rounds.reserve(out.rounds);
    std::vector<Basis> bases;
    for (RoundId r = 1; r <= out.rounds; ++r) {
        auto rng = RandomSource::for_stream(config.seed, Stream::Bob, r);
        const BobChoice choice = protocol::bob_choose(rng);
        link.send(wire::measure(r, choice));
        const Message res = link.expect("RESULT");
        if (res.at("round_id").get<RoundId>() != r) link.fail(wire::code::kOutOfOrder, "RESULT for the wrong round");
        rounds.push_back(protocol::bob_record(r, choice, res.at("secure_outcome").get<qsim::Outcome>(),
                                              res.at("aux_outcome").get<qsim::Outcome>()));
        bases.push_back(choice.secure_basis);
    }

    link.send(wire::basis_announce(bases));
    const auto alice_bases = checked_bases(link, link.expect("BASIS_ANNOUNCE"), out.rounds);
    const KeyBits key = bob_combined(rounds, alice_bases);
    out.sifted_bits = key.size();

    const Message disclose = link.expect("SAMPLE_DISCLOSE");
    const auto positions = positions_of(disclose);
    const KeyBits alice_bits = bits_of(disclose);
    if (key.empty()) {
        if (!positions.empty()) link.fail(wire::code::kProtocolViolation, "sample disclosed from an empty key");
        out.verdict = Verdict::Clean;
        out.qber_estimate = 0.0;
    } else {
        if (positions.empty() || !ascending_within(positions, key.size()))
            link.fail(wire::code::kBadField, "SAMPLE_DISCLOSE indices must ascend within the sifted key");
        const auto report = protocol::evaluate_sample(positions, alice_bits, key, config.qber_threshold);
        out.verdict = report.verdict;
        out.qber_estimate = report.qber_estimate;
    }
    link.send(wire::verdict(out.verdict, out.qber_estimate));
    if (out.verdict == Verdict::Clean) out.final_key = protocol::discard_positions(key, positions);
    return out;
}

std::vector<std::string> scan_transcript(const SessionTranscript& t, Role owner) {
    std::vector<std::string> problems;
    const auto where = [](const TranscriptEntry& e) { return "entry " + std::to_string(e.timestamp) + ": "; };
    static const std::set<std::string> kPrivateKeys = {"label", "secure_qubit", "state", "amplitude", "amplitudes"};

    std::optional<std::uint64_t> bob_announce, alice_announce;
    for (const auto& e : t.entries) {
        const Message& m = e.message;
        try {
            wire::validate(m);
        } catch (const WireError& err) {
            problems.push_back(where(e) + "invalid message: " + err.what());
            continue;
        }
        const std::string& type = wire::type_of(m);
        const bool sent = e.direction == Direction::Sent;

        // The quantum link: labels travel only from Alice to the channel,
        // role choices only from Bob, outcomes only back to Bob.
        if (type == "PREPARE") {
            if (!(owner == Role::Alice && sent)) problems.push_back(where(e) + "PREPARE seen outside alice's uplink");
            continue;
        }
        if (type == "MEASURE") {
            if (!(owner == Role::Bob && sent)) problems.push_back(where(e) + "MEASURE seen outside bob's uplink");
            continue;
        }
        if (type == "RESULT" && !(owner == Role::Bob && !sent))
            problems.push_back(where(e) + "RESULT delivered to someone other than bob");

        if (type == "BASIS_ANNOUNCE") {
            const bool from_bob = (owner == Role::Bob) == sent;
            (from_bob ? bob_announce : alice_announce) = e.timestamp;
            if (!from_bob && !bob_announce) problems.push_back(where(e) + "alice announced bases before bob");
        }

        // Everything else is public.
        for (const auto& [key, value] : m.items()) {
            if (kPrivateKeys.contains(key)) problems.push_back(where(e) + "private field '" + key + "' on the public bus");
            if (value.is_string()) {
                const auto& s = value.get_ref<const std::string&>();
                if (key != "message" && key != "code") {
                    for (auto l : protocol::kAllLabels)
                        if (s == protocol::label_name(l)) problems.push_back(where(e) + "label string in '" + key + "'");
                } else if (s.find("XPHI") != std::string::npos) {
                    problems.push_back(where(e) + "label text in '" + key + "'");
                }
            }
            const bool real_ok = type == "VERDICT" && key == "qber";
            if (value.is_number_float() && !real_ok) problems.push_back(where(e) + "non-integer value in '" + key + "'");
            if (value.is_array())
                for (const auto& x : value)
                    if (!x.is_number_integer() || x.get<std::int64_t>() < 0) problems.push_back(where(e) + "non-integer element in '" + key + "'");
        }
    }
    return problems;
}

ReplayResult replay_transcripts(const SessionTranscript& alice, const SessionTranscript& bob, double qber_threshold) {
    std::vector<AliceRound> a_rounds;
    std::vector<std::size_t> positions;
    bool saw_disclose = false;
    for (const auto& e : alice.entries) {
        if (e.direction != Direction::Sent) continue;
        const auto& type = wire::type_of(e.message);
        if (type == "PREPARE")
            a_rounds.push_back({e.message.at("round_id").get<RoundId>(), wire::label_of(e.message)});
        else if (type == "SAMPLE_DISCLOSE") {
            positions = positions_of(e.message);
            saw_disclose = true;
        }
    }
    std::vector<BobRound> b_rounds;
    std::optional<std::pair<RoundId, BobChoice>> pending;
    for (const auto& e : bob.entries) {
        const auto& type = wire::type_of(e.message);
        if (type == "MEASURE" && e.direction == Direction::Sent) {
            pending.emplace(e.message.at("round_id").get<RoundId>(), wire::choice_of(e.message));
        } else if (type == "RESULT" && e.direction == Direction::Received) {
            if (!pending || pending->first != e.message.at("round_id").get<RoundId>())
                throw protocol::ProtocolError("bob transcript has a RESULT without its MEASURE");
            b_rounds.push_back(protocol::bob_record(pending->first, pending->second,
                                                    e.message.at("secure_outcome").get<qsim::Outcome>(),
                                                    e.message.at("aux_outcome").get<qsim::Outcome>()));
            pending.reset();
        }
    }
    if (!saw_disclose) throw protocol::ProtocolError("alice transcript has no SAMPLE_DISCLOSE");

    const auto s = protocol::sift(a_rounds, b_rounds);
    const KeyBits combined = protocol::combine_keys(s.bob_secure_key, s.bob_aux_key);
    ReplayResult out;
    if (s.size() > 0) {
        KeyBits disclosed;
        for (std::size_t p : positions) disclosed.push_back(s.alice_key.at(p));
        out.verdict = protocol::evaluate_sample(positions, disclosed, combined, qber_threshold).verdict;
    }
    out.alice_key = protocol::discard_positions(s.alice_key, positions);
    out.bob_key = protocol::discard_positions(combined, positions);
    return out;
}

}  // namespace qkd::session
