#include "qkdpair/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>

namespace qkd::net {
namespace {

std::string os_error(int err) { return std::strerror(err); }

sockaddr_in resolve(const Endpoint& ep) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res); rc != 0 || !res)
        throw NetError("cannot resolve host '" + ep.host + "': " + ::gai_strerror(rc));
    sockaddr_in addr{};
    std::memcpy(&addr, res->ai_addr, sizeof(addr));
    ::freeaddrinfo(res);
    addr.sin_port = htons(ep.port);
    return addr;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size())
        throw NetError("endpoint must be host:port, got '" + std::string(text) + "'");
    Endpoint ep;
    ep.host = std::string(text.substr(0, colon));
    const auto digits = text.substr(colon + 1);
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || value > 65535)
        throw NetError("invalid port in endpoint '" + std::string(text) + "'");
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void Socket::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::optional<std::string> LineStream::read_line() {
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        if (buffer_.size() > kMaxLine) throw NetError("line exceeds maximum length");
        char chunk[4096];
        const ssize_t n = ::recv(sock_.fd(), chunk, sizeof(chunk), 0);
        if (n == 0) {
            if (!buffer_.empty()) throw NetError("connection closed mid-line");
            return std::nullopt;
        }
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK) throw NetError("receive timed out");
            throw NetError("receive failed: " + os_error(errno));
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void LineStream::write_line(std::string_view line) {
    std::string framed(line);
    framed.push_back('\n');
    std::size_t sent = 0;
    while (sent < framed.size()) {
        const ssize_t n = ::send(sock_.fd(), framed.data() + sent, framed.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw NetError("send failed: " + os_error(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

void LineStream::set_receive_timeout(std::chrono::milliseconds t) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(t.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((t.count() % 1000) * 1000);
    ::setsockopt(sock_.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

Listener Listener::bind(const Endpoint& ep) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw NetError("socket failed: " + os_error(errno));
    const int yes = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    sockaddr_in addr = resolve(ep);
    if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw NetError("cannot listen on " + ep.str() + ": " + os_error(errno));
    if (::listen(s.fd(), 8) != 0) throw NetError("listen failed: " + os_error(errno));

    socklen_t len = sizeof(addr);
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    Listener l;
    l.sock_ = std::move(s);
    l.bound_ = ep;
    l.bound_.port = ntohs(addr.sin_port);
    return l;
}

LineStream Listener::accept() {
    for (;;) {
        const int fd = ::accept(sock_.fd(), nullptr, nullptr);
        if (fd >= 0) {
            const int yes = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof(yes));
            return LineStream(Socket(fd));
        }
        if (errno == EINTR) continue;
        throw NetError("accept failed: " + os_error(errno));
    }
}

LineStream connect_to(const Endpoint& ep) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw NetError("socket failed: " + os_error(errno));
    sockaddr_in addr = resolve(ep);
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw NetError("cannot connect to " + ep.str() + ": " + os_error(errno));
    const int yes = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &yes, sizeof(yes));
    return LineStream(std::move(s));
}

}  // namespace qkd::net
