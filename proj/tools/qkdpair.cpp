// qkdpair: batch simulation, exact oracle, traces and peer-mode roles.
//
// Exit status: 0 clean, 2 suspect, 1 usage or internal error.

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "qkdpair/analysis.hpp"
#include "qkdpair/session.hpp"

namespace {

using nlohmann::ordered_json;
using qkd::analysis::ExperimentConfig;

constexpr int kExitClean = 0;
constexpr int kExitError = 1;
constexpr int kExitSuspect = 2;

constexpr const char* kSeedEnv = "QKDPAIR_SEED";
constexpr const char* kDefaultEndpoint = "127.0.0.1:7878";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int verdict_exit(qkd::protocol::Verdict v) { return v == qkd::protocol::Verdict::Clean ? kExitClean : kExitSuspect; }

// Raw flag values plus the options they came from, so explicit flags can
// override the config file.
struct Flags {
    std::string protocol = "pair";
    std::uint64_t rounds = 10000;
    std::uint64_t seed = 1;
    std::string eve = "none";
    double noise = 0.0;
    double verify_fraction = qkd::protocol::kDefaultVerifyFraction;
    double qber_threshold = 0.0;
    std::string format = "json";
    std::string output;
    std::string config;
    bool reveal_key = false;

    CLI::Option* o_protocol = nullptr;
    CLI::Option* o_rounds = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_eve = nullptr;
    CLI::Option* o_noise = nullptr;
    CLI::Option* o_verify = nullptr;
    CLI::Option* o_threshold = nullptr;
    CLI::Option* o_format = nullptr;
    CLI::Option* o_output = nullptr;
};

void add_experiment_flags(CLI::App& cmd, Flags& f, bool with_rounds) {
    f.o_protocol = cmd.add_option("--protocol", f.protocol, "pair or bb84")->capture_default_str();
    if (with_rounds) {
        f.o_rounds = cmd.add_option("--rounds", f.rounds, "rounds to run")->capture_default_str();
        f.o_seed = cmd.add_option("--seed", f.seed, std::string("master seed (default from ") + kSeedEnv + ", else 1)");
        f.o_verify = cmd.add_option("--verify-fraction", f.verify_fraction, "fraction of the sifted key disclosed")
                         ->capture_default_str();
        f.o_threshold = cmd.add_option("--qber-threshold", f.qber_threshold,
                                       "abort above this sample QBER (default 0 noiseless, 0.11 noisy)");
        cmd.add_flag("--reveal-key", f.reveal_key, "print raw key bits, not only their SHA-256");
    }
    f.o_eve = cmd.add_option("--eve", f.eve,
                             "none | intercept-both:{random,z,x} | intercept-one:{1,2}:{random,z,x} | role-oracle")
                  ->capture_default_str();
    f.o_noise = cmd.add_option("--noise", f.noise, "depolarizing probability per qubit")->capture_default_str();
    f.o_output = cmd.add_option("--output", f.output, "write to this file instead of stdout");
    cmd.add_option("--config", f.config, "JSON file with the same field names; flags override it");
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw UsageError("config file '" + path + "' is not a JSON object");
    return j;
}

template <typename T>
T config_value(const nlohmann::json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw UsageError(std::string("config field '") + key + "' has the wrong type");
    }
}

std::uint64_t parse_seed_env() {
    const char* env = std::getenv(kSeedEnv);
    if (!env || !*env) return 1;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') throw UsageError(std::string(kSeedEnv) + " is not an unsigned integer");
    return v;
}

// Defaults, then the environment seed, then the config file, then flags.
ExperimentConfig resolve(Flags& f) {
    std::string protocol = "pair", eve = "none";
    ExperimentConfig cfg;
    cfg.seed = parse_seed_env();
    std::optional<double> threshold;

    if (!f.config.empty()) {
        const auto j = read_json_file(f.config);
        for (const auto& [key, value] : j.items()) {
            if (key == "protocol") protocol = config_value<std::string>(j, "protocol");
            else if (key == "rounds") cfg.rounds = config_value<std::uint64_t>(j, "rounds");
            else if (key == "seed") cfg.seed = config_value<std::uint64_t>(j, "seed");
            else if (key == "eve") eve = config_value<std::string>(j, "eve");
            else if (key == "noise_p") cfg.noise_p = config_value<double>(j, "noise_p");
            else if (key == "verify_fraction") cfg.verify_fraction = config_value<double>(j, "verify_fraction");
            else if (key == "qber_threshold") threshold = config_value<double>(j, "qber_threshold");
            else if (key == "output_format") { if (!f.o_format || !f.o_format->count()) f.format = config_value<std::string>(j, "output_format"); }
            else if (key == "output_path") { if (!f.o_output->count()) f.output = config_value<std::string>(j, "output_path"); }
            else throw UsageError("unknown config field '" + key + "'");
        }
    }
    auto given = [](CLI::Option* o) { return o && o->count() > 0; };
    if (given(f.o_protocol)) protocol = f.protocol;
    if (given(f.o_eve)) eve = f.eve;
    if (given(f.o_rounds)) cfg.rounds = f.rounds;
    if (given(f.o_seed)) cfg.seed = f.seed;
    if (given(f.o_noise)) cfg.noise_p = f.noise;
    if (given(f.o_verify)) cfg.verify_fraction = f.verify_fraction;
    if (given(f.o_threshold)) threshold = f.qber_threshold;

    if (f.format != "json" && f.format != "csv" && f.format != "table")
        throw UsageError("output_format must be json, csv or table");
    try {
        cfg.protocol = qkd::analysis::parse_protocol(protocol);
        cfg.eve = qkd::adversary::parse_strategy(eve);
        cfg.qber_threshold = threshold.value_or(qkd::analysis::default_threshold(cfg.noise_p));
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

std::string format_scalar(const ordered_json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// A flat JSON object as pretty JSON, a two-line CSV or an aligned table.
std::string render(const ordered_json& record, const std::string& format) {
    if (format == "json") return record.dump(2) + "\n";
    std::ostringstream out;
    if (format == "csv") {
        bool first = true;
        for (const auto& [k, v] : record.items()) out << (first ? "" : ",") << k, first = false;
        out << "\n";
        first = true;
        for (const auto& [k, v] : record.items()) out << (first ? "" : ",") << format_scalar(v), first = false;
        out << "\n";
        return out.str();
    }
    std::size_t width = 0;
    for (const auto& [k, v] : record.items()) width = std::max(width, k.size());
    for (const auto& [k, v] : record.items()) {
        const std::string s = format_scalar(v);
        out << k << std::string(width + 2 - k.size(), ' ') << (s.empty() ? "-" : s) << "\n";
    }
    return out.str();
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << text;
}

ordered_json config_json(const ExperimentConfig& c) {
    ordered_json j;
    j["protocol"] = std::string(qkd::analysis::protocol_name(c.protocol));
    j["rounds"] = c.rounds;
    j["seed"] = c.seed;
    j["eve"] = qkd::adversary::strategy_name(c.eve);
    j["noise_p"] = c.noise_p;
    j["verify_fraction"] = c.verify_fraction;
    j["qber_threshold"] = c.qber_threshold;
    return j;
}

int cmd_simulate(Flags& f) {
    const ExperimentConfig cfg = resolve(f);
    const auto run = qkd::analysis::run_pipeline(cfg);
    ordered_json j = config_json(cfg);
    const ordered_json stats = qkd::analysis::to_json(run.stats);
    for (const auto& [k, v] : stats.items()) j[k] = v;
    if (f.reveal_key) {
        const bool clean = run.stats.verdict == qkd::protocol::Verdict::Clean;
        j["alice_key"] = clean ? ordered_json(qkd::analysis::key_bit_string(run.alice_final_key)) : ordered_json();
        j["bob_key"] = clean ? ordered_json(qkd::analysis::key_bit_string(run.bob_final_key)) : ordered_json();
    }
    emit(render(j, f.format), f.output);
    return verdict_exit(run.stats.verdict);
}

int cmd_oracle(Flags& f) {
    const ExperimentConfig cfg = resolve(f);
    qkd::analysis::OracleConfig oc{cfg.protocol, cfg.eve, cfg.noise_p};
    ordered_json j;
    try {
        j = qkd::analysis::to_json(oc, qkd::analysis::marginals(qkd::analysis::enumerate_exact(oc)));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    emit(render(j, f.format), f.output);
    return kExitClean;
}

int cmd_trace(Flags& f, std::size_t rows, bool all_rounds) {
    const ExperimentConfig cfg = resolve(f);
    if (cfg.protocol != qkd::analysis::ProtocolKind::Pair) throw UsageError("trace is defined for the pair protocol");
    const auto run = qkd::analysis::run_pipeline(cfg);
    auto cols = qkd::analysis::trace_columns(run.alice, run.bob, !all_rounds);
    if (cols.size() > rows) cols.resize(rows);

    std::string text;
    if (f.format == "csv") {
        text = qkd::analysis::format_trace_csv(cols);
    } else if (f.format == "json") {
        ordered_json arr = ordered_json::array();
        for (const auto& c : cols) {
            ordered_json o;
            o["round_id"] = c.round_id;
            o["basis"] = std::string(1, qkd::qsim::basis_char(c.basis));
            o["alice_key_bit"] = c.alice_bit;
            o["bob_secure_state"] = std::string(1, c.secure_state);
            o["bob_secure_key_bit"] = c.secure_bit;
            o["bob_auxiliary_state"] = std::string(1, c.aux_state);
            o["bob_auxiliary_bit"] = c.aux_bit;
            o["bob_secure_plus_auxiliary"] = c.combined;
            arr.push_back(o);
        }
        text = arr.dump(2) + "\n";
    } else {
        text = qkd::analysis::format_trace_table(cols);
    }
    emit(text, f.output);
    return kExitClean;
}

struct PeerFlags {
    std::string role;
    std::string listen = kDefaultEndpoint;
    std::string connect = kDefaultEndpoint;
    std::string transcript;
    std::uint64_t timeout_ms = qkd::session::kDefaultTimeout.count();
};

void write_transcript(const std::string& path, const qkd::session::SessionTranscript& t) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write transcript '" + path + "'");
    out << qkd::session::to_json(t).dump() << "\n";
}

int cmd_peer(Flags& f, PeerFlags& p) {
    const ExperimentConfig cfg = resolve(f);
    const std::chrono::milliseconds timeout(p.timeout_ms);
    if (cfg.protocol != qkd::analysis::ProtocolKind::Pair) throw UsageError("peer mode runs the pair protocol only");

    if (p.role == "channel") {
        qkd::session::ChannelConfig cc;
        cc.listen = qkd::net::Endpoint::parse(p.listen);
        cc.eve = cfg.eve;
        cc.noise_p = cfg.noise_p;
        cc.seed = cfg.seed;
        cc.idle_timeout = timeout;
        cc.on_listening = [](const qkd::net::Endpoint& ep) { std::cout << "listening " << ep.str() << std::endl; };
        const auto report = qkd::session::run_channel_daemon(cc);
        ordered_json j;
        j["role"] = "channel";
        j["rounds"] = report.rounds;
        j["status"] = report.exit_status == 0 ? "complete" : "aborted";
        j["error"] = report.error.empty() ? ordered_json() : ordered_json(report.error);
        std::cout << j.dump() << std::endl;
        if (!report.error.empty()) std::cerr << "qkdpair: session aborted: " << report.error << "\n";
        return report.exit_status == 0 ? kExitClean : kExitError;
    }

    qkd::session::PeerOutcome out;
    try {
        if (p.role == "alice") {
            qkd::session::AliceConfig ac;
            ac.connect = qkd::net::Endpoint::parse(p.connect);
            ac.rounds = cfg.rounds;
            ac.seed = cfg.seed;
            ac.verify_fraction = cfg.verify_fraction;
            ac.timeout = timeout;
            out = qkd::session::run_alice_peer(ac);
        } else {
            qkd::session::BobConfig bc;
            bc.connect = qkd::net::Endpoint::parse(p.connect);
            bc.seed = cfg.seed;
            bc.qber_threshold = cfg.qber_threshold;
            bc.timeout = timeout;
            out = qkd::session::run_bob_peer(bc);
        }
    } catch (const qkd::session::SessionError& e) {
        throw std::runtime_error("session aborted (" + e.code() + "): " + e.what());
    }
    write_transcript(p.transcript, out.transcript);

    ordered_json j;
    j["role"] = p.role;
    j["rounds"] = out.rounds;
    j["sifted_bits"] = out.sifted_bits;
    j["verdict"] = std::string(qkd::protocol::verdict_name(out.verdict));
    j["qber_estimate"] = out.qber_estimate;
    j["key_bits"] = out.final_key ? out.final_key->size() : 0;
    j["key_sha256"] = out.final_key ? ordered_json(qkd::analysis::key_digest_hex(*out.final_key)) : ordered_json();
    if (f.reveal_key)
        j["key"] = out.final_key ? ordered_json(qkd::analysis::key_bit_string(*out.final_key)) : ordered_json();
    emit(render(j, f.format), f.output);
    return verdict_exit(out.verdict);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Qubit-pair QKD simulator with a BB84 baseline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "qkdpair 1.0");

    Flags sim_f, ora_f, tr_f, peer_f;
    auto* sim = app.add_subcommand("simulate", "run a seeded batch experiment and print its statistics");
    add_experiment_flags(*sim, sim_f, true);
    sim_f.o_format = sim->add_option("--format", sim_f.format, "json, csv or table")
                         ->check(CLI::IsMember({"json", "csv", "table"}))
                         ->capture_default_str();

    auto* ora = app.add_subcommand("oracle", "print exact per-round marginals by branch enumeration");
    add_experiment_flags(*ora, ora_f, false);
    ora_f.o_format = ora->add_option("--format", ora_f.format, "json, csv or table")
                         ->check(CLI::IsMember({"json", "csv", "table"}))
                         ->capture_default_str();

    std::size_t rows = 15;
    bool all_rounds = false;
    auto* tr = app.add_subcommand("trace", "print the seven-row round trace of a seeded pair session");
    add_experiment_flags(*tr, tr_f, true);
    tr_f.format = "table";
    tr_f.o_format = tr->add_option("--format", tr_f.format, "table, csv or json")
                        ->check(CLI::IsMember({"json", "csv", "table"}))
                        ->capture_default_str();
    tr->add_option("--rows", rows, "columns to print")->capture_default_str();
    tr->add_flag("--all-rounds", all_rounds, "include rounds discarded by sifting");

    PeerFlags pf;
    auto* peer = app.add_subcommand("peer", "run one party of a networked pair session");
    add_experiment_flags(*peer, peer_f, true);
    peer_f.o_format = peer->add_option("--format", peer_f.format, "json, csv or table")
                          ->check(CLI::IsMember({"json", "csv", "table"}))
                          ->capture_default_str();
    peer->add_option("--role", pf.role, "channel, alice or bob")
        ->required()
        ->check(CLI::IsMember({"channel", "alice", "bob"}));
    peer->add_option("--listen", pf.listen, "channel: host:port to bind (port 0 picks one)")->capture_default_str();
    peer->add_option("--connect", pf.connect, "alice/bob: channel host:port")->capture_default_str();
    peer->add_option("--transcript", pf.transcript, "alice/bob: write the wire transcript as JSON");
    peer->add_option("--timeout-ms", pf.timeout_ms, "receive and idle timeout")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitClean : kExitError;
    }

    try {
        if (*sim) return cmd_simulate(sim_f);
        if (*ora) return cmd_oracle(ora_f);
        if (*tr) return cmd_trace(tr_f, rows, all_rounds);
        if (*peer) return cmd_peer(peer_f, pf);
    } catch (const UsageError& e) {
        std::cerr << "qkdpair: " << e.what() << "\nRun with --help for usage.\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "qkdpair: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
