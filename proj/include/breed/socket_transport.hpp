#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "breed/messages.hpp"

namespace breed {

// Minimal loopback TCP plumbing for the multi-process wire protocol. Frames
// go through encode()/decode(), so the socket path and the in-process path
// share one codec.

class TcpListener {
public:
    TcpListener() {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("socket() failed");
        const int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;  // ephemeral
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            ::close(fd_);
            throw std::runtime_error("bind() failed");
        }
        if (::listen(fd_, 64) != 0) {
            ::close(fd_);
            throw std::runtime_error("listen() failed");
        }
        sockaddr_in bound{};
        socklen_t len = sizeof bound;
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = ntohs(bound.sin_port);
    }

    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;
    ~TcpListener() {
        if (fd_ >= 0) ::close(fd_);
    }

    std::uint16_t port() const { return port_; }

    // Returns a connected fd, or -1 if nothing arrived within the timeout.
    int accept_with_timeout(int timeout_ms) {
        pollfd pfd{fd_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, timeout_ms);
        if (rc <= 0) return -1;
        return ::accept(fd_, nullptr, nullptr);
    }

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

inline int tcp_connect(std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw std::runtime_error("connect() to port " + std::to_string(port) + " failed");
    }
    return fd;
}

inline void send_all(int fd, std::span<const std::uint8_t> bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, 0);
        if (n <= 0) throw std::runtime_error("send() failed");
        sent += static_cast<std::size_t>(n);
    }
}

inline void send_frame(int fd, const Message& msg) { send_all(fd, encode(msg)); }

namespace detail {

// False on clean EOF before the first byte; throws on EOF mid-read.
inline bool read_exact(int fd, std::uint8_t* buf, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::recv(fd, buf + got, n - got, 0);
        if (r == 0) {
            if (got == 0) return false;
            throw MalformedMessage("connection closed mid-frame");
        }
        if (r < 0) throw std::runtime_error("recv() failed");
        got += static_cast<std::size_t>(r);
    }
    return true;
}

}  // namespace detail

// Reads one frame off the stream; nullopt on clean end of stream. A
// connection dropped inside a frame surfaces as MalformedMessage.
inline std::optional<Message> read_frame(int fd) {
    std::vector<std::uint8_t> buf(5);  // u8 tag + u32 sim_id
    if (!detail::read_exact(fd, buf.data(), 5)) return std::nullopt;
    const auto tag = buf[0];
    if (tag > static_cast<std::uint8_t>(MsgTag::job_status))
        throw MalformedMessage("unknown tag " + std::to_string(tag));

    auto read_more = [&](std::size_t n) {
        const std::size_t offset = buf.size();
        buf.resize(offset + n);
        if (!detail::read_exact(fd, buf.data() + offset, n))
            throw MalformedMessage("connection closed mid-frame");
    };

    switch (static_cast<MsgTag>(tag)) {
        case MsgTag::sample: {
            read_more(8);  // t + n
            const std::uint32_t n = static_cast<std::uint32_t>(buf[9]) |
                                    (static_cast<std::uint32_t>(buf[10]) << 8) |
                                    (static_cast<std::uint32_t>(buf[11]) << 16) |
                                    (static_cast<std::uint32_t>(buf[12]) << 24);
            read_more(4ull * n);
            break;
        }
        case MsgTag::param_update:
            read_more(40);
            break;
        case MsgTag::job_status:
            read_more(8);
            break;
        default:
            break;  // header-only frames
    }
    return decode(buf).first;
}

}  // namespace breed
