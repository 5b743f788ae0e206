#ifndef DSCS_SERVICE_TRANSPORT_HPP
#define DSCS_SERVICE_TRANSPORT_HPP

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>

#include <condition_variable>
#include <deque>
#include <thread>

#include "dscs/service/handler.hpp"

namespace dscs::service {

/// One request, one reply.
class Transport {
public:
    virtual ~Transport() = default;
    virtual wire::Frame roundtrip(const wire::Frame& req) = 0;
};

/// Calls the service directly but still goes through the byte encoding, so
/// framing bugs show up in tests too.
class InProcessTransport : public Transport {
public:
    explicit InProcessTransport(Service& s) : service_(s) {}
    wire::Frame roundtrip(const wire::Frame& req) override {
        auto in = wire::decode(wire::encode(req));
        return wire::decode(wire::encode(service_.handle(in)));
    }

private:
    Service& service_;
};

inline Bytes recv_exact(int fd, std::size_t n) {
    Bytes out(n);
    std::size_t off = 0;
    while (off < n) {
        ssize_t k = ::recv(fd, out.data() + off, n - off, 0);
        if (k < 0 && errno == EINTR) continue;
        if (k <= 0) fail(ErrorCode::Transport, k == 0 ? "connection closed" : std::string("recv: ") + std::strerror(errno));
        off += static_cast<std::size_t>(k);
    }
    return out;
}

inline void send_all(int fd, ByteView b) {
    std::size_t off = 0;
    while (off < b.size()) {
        ssize_t k = ::send(fd, b.data() + off, b.size() - off, MSG_NOSIGNAL);
        if (k < 0 && errno == EINTR) continue;
        if (k < 0) fail(ErrorCode::Transport, std::string("send: ") + std::strerror(errno));
        off += static_cast<std::size_t>(k);
    }
}

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7410;

    /// "host:port" or ":port".
    static Endpoint parse(const std::string& s) {
        auto colon = s.rfind(':');
        if (colon == std::string::npos) fail(ErrorCode::Usage, "address must be host:port");
        Endpoint e;
        if (colon > 0) e.host = s.substr(0, colon);
        try {
            unsigned long p = std::stoul(s.substr(colon + 1));
            if (p > 65535) throw std::out_of_range("port");
            e.port = static_cast<std::uint16_t>(p);
        } catch (const std::exception&) {
            fail(ErrorCode::Usage, "bad port in " + s);
        }
        return e;
    }
    std::string str() const { return host + ":" + std::to_string(port); }
};

class TcpTransport : public Transport {
public:
    explicit TcpTransport(const Endpoint& ep) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (int rc = ::getaddrinfo(ep.host.c_str(), std::to_string(ep.port).c_str(), &hints, &res); rc != 0)
            fail(ErrorCode::Transport, "resolve " + ep.host + ": " + ::gai_strerror(rc));
        std::string last = "no addresses";
        for (auto* a = res; a; a = a->ai_next) {
            Fd s(::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol));
            if (!s) continue;
            if (::connect(s.get(), a->ai_addr, a->ai_addrlen) == 0) {
                int one = 1;
                ::setsockopt(s.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
                sock_ = std::move(s);
                break;
            }
            last = std::strerror(errno);
        }
        ::freeaddrinfo(res);
        if (!sock_) fail(ErrorCode::Transport, "connect " + ep.str() + ": " + last);
    }

    wire::Frame roundtrip(const wire::Frame& req) override {
        send_all(sock_.get(), wire::encode(req));
        return wire::read_frame([&](std::size_t n) { return recv_exact(sock_.get(), n); });
    }

    /// Raw bytes out, one frame back; for protocol tests.
    wire::Frame roundtrip_raw(ByteView bytes) {
        send_all(sock_.get(), bytes);
        return wire::read_frame([&](std::size_t n) { return recv_exact(sock_.get(), n); });
    }

private:
    Fd sock_;
};

/// Accepts connections and serves them on a fixed pool of workers. When all
/// workers are busy and the queue is full, the acceptor stops accepting.
class TcpServer {
public:
    TcpServer(Service& service, const Endpoint& ep, std::size_t workers = 4, std::size_t queue_cap = 64)
        : service_(service), queue_cap_(queue_cap) {
        listener_ = Fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (!listener_) io_fail("socket");
        int one = 1;
        ::setsockopt(listener_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) fail(ErrorCode::Usage, "listen host must be an IPv4 address");
        if (::bind(listener_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) io_fail("bind " + ep.str());
        if (::listen(listener_.get(), 128) != 0) io_fail("listen");
        socklen_t len = sizeof addr;
        ::getsockname(listener_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        for (std::size_t k = 0; k < std::max<std::size_t>(1, workers); ++k) pool_.emplace_back([this] { work(); });
        acceptor_ = std::thread([this] { accept_loop(); });
    }

    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;
    ~TcpServer() { stop(); }

    std::uint16_t port() const { return port_; }

    void stop() {
        {
            std::lock_guard lock(mu_);
            if (stopping_) return;
            stopping_ = true;
        }
        cv_.notify_all();
        if (acceptor_.joinable()) acceptor_.join();
        listener_.reset();
        for (auto& t : pool_) t.join();
        for (int fd : queue_) ::close(fd);
        queue_.clear();
    }

    /// Blocks until stop() is called from elsewhere (e.g. a signal watcher).
    void wait() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_; });
    }

private:
    void accept_loop() {
        for (;;) {
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stopping_ || queue_.size() < queue_cap_; });
                if (stopping_) return;
            }
            pollfd p{listener_.get(), POLLIN, 0};
            int rc = ::poll(&p, 1, 100);
            if (rc <= 0) continue;
            int fd = ::accept4(listener_.get(), nullptr, nullptr, SOCK_CLOEXEC);
            if (fd < 0) continue;
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            {
                std::lock_guard lock(mu_);
                queue_.push_back(fd);
            }
            cv_.notify_all();
        }
    }

    void work() {
        for (;;) {
            int fd;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
                if (stopping_) return;
                fd = queue_.front();
                queue_.pop_front();
            }
            cv_.notify_all();
            Fd conn(fd);
            serve(conn.get());
        }
    }

    bool stopping() {
        std::lock_guard lock(mu_);
        return stopping_;
    }

    /// Waits for the next frame, checking for shutdown between polls.
    bool readable(int fd) {
        while (!stopping()) {
            pollfd p{fd, POLLIN, 0};
            int rc = ::poll(&p, 1, 100);
            if (rc > 0) return true;
            if (rc < 0 && errno != EINTR) return false;
        }
        return false;
    }

    void serve(int fd) {
        while (readable(fd)) {
            wire::Frame req;
            try {
                req = wire::read_frame([&](std::size_t n) { return recv_exact(fd, n); });
            } catch (const Error& e) {
                // Bad framing means the stream cannot be resynchronised.
                if (e.code() == ErrorCode::Malformed) {
                    try {
                        send_all(fd, wire::encode(wire::error_frame(ErrorCode::Malformed, e.what())));
                    } catch (const Error&) {
                    }
                }
                return;
            }
            try {
                send_all(fd, wire::encode(service_.handle(req)));
            } catch (const Error&) {
                return;
            }
        }
    }

    Service& service_;
    std::size_t queue_cap_;
    Fd listener_;
    std::uint16_t port_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<int> queue_;
    bool stopping_ = false;
    std::vector<std::thread> pool_;
    std::thread acceptor_;
};

} // namespace dscs::service

#endif // DSCS_SERVICE_TRANSPORT_HPP
