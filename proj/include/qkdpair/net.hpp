#pragma once

// Blocking TCP line streams over POSIX sockets.

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qkd::net {

class NetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    // "host:port"; throws NetError when malformed.
    static Endpoint parse(std::string_view text);
    std::string str() const;
};

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) noexcept : fd_(fd) {}
    ~Socket();
    Socket(Socket&& other) noexcept;
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    // Wakes any thread blocked on this socket; the descriptor stays open.
    void shutdown() noexcept;
    void close() noexcept;

private:
    int fd_ = -1;
};

// Newline-delimited framing. One reader thread and one writer thread may use
// a stream concurrently.
class LineStream {
public:
    static constexpr std::size_t kMaxLine = 64u << 20;

    LineStream() = default;
    explicit LineStream(Socket s) : sock_(std::move(s)) {}

    // Next line without its terminator; empty optional on orderly EOF.
    // Throws NetError on timeout, socket error or an oversized line.
    std::optional<std::string> read_line();
    void write_line(std::string_view line);

    void set_receive_timeout(std::chrono::milliseconds t);
    void shutdown() noexcept { sock_.shutdown(); }
    void close() noexcept { sock_.close(); }
    bool valid() const noexcept { return sock_.valid(); }

private:
    Socket sock_;
    std::string buffer_;
};

class Listener {
public:
    // Port 0 binds an ephemeral port; endpoint() reports the bound one.
    static Listener bind(const Endpoint& ep);

    LineStream accept();
    Endpoint endpoint() const { return bound_; }
    void shutdown() noexcept { sock_.shutdown(); }

private:
    Socket sock_;
    Endpoint bound_;
};

// Throws NetError with the endpoint and the OS reason (for example
// "Connection refused").
LineStream connect_to(const Endpoint& ep);

}  // namespace qkd::net
