#include "guest_process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <stdexcept>
#include <thread>

namespace revel::detail {

namespace {

int remaining_ms(std::chrono::steady_clock::time_point deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return 0;
    return static_cast<int>(std::min<long long>(left.count() + 1, 1 << 30));
}

}  // namespace

GuestProcess::GuestProcess(const std::vector<std::string>& argv) {
    if (argv.empty()) throw std::invalid_argument("guest command is empty");
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
        throw std::runtime_error("socketpair failed");

    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(sv[0]);
        ::close(sv[1]);
        throw std::runtime_error("fork failed");
    }
    if (pid == 0) {
        ::dup2(sv[1], STDIN_FILENO);
        ::dup2(sv[1], STDOUT_FILENO);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(sv[1]);
    fd_ = sv[0];
    pid_ = pid;
    ::fcntl(fd_, F_SETFL, ::fcntl(fd_, F_GETFL) | O_NONBLOCK);
}

GuestProcess::~GuestProcess() { shutdown(); }

GuestProcess::Io GuestProcess::write_line(const std::string& line, std::chrono::steady_clock::time_point deadline) {
    if (fd_ < 0) return Io::closed;
    std::string data = line;
    data.push_back('\n');
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && errno == EINTR) continue;
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            pollfd p{fd_, POLLOUT, 0};
            int r = ::poll(&p, 1, remaining_ms(deadline));
            if (r == 0) return Io::timeout;
            if (r < 0 && errno != EINTR) return Io::closed;
            if (p.revents & (POLLERR | POLLHUP)) return Io::closed;
            continue;
        }
        return Io::closed;
    }
    return Io::ok;
}

GuestProcess::Io GuestProcess::read_line(std::string& line, std::chrono::steady_clock::time_point deadline) {
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return Io::ok;
        }
        if (fd_ < 0) return Io::closed;
        pollfd p{fd_, POLLIN, 0};
        int r = ::poll(&p, 1, remaining_ms(deadline));
        if (r == 0) return Io::timeout;
        if (r < 0) {
            if (errno == EINTR) continue;
            return Io::closed;
        }
        char chunk[65536];
        ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n > 0) {
            buffer_.append(chunk, static_cast<std::size_t>(n));
        } else if (n == 0) {
            return Io::closed;
        } else if (errno != EINTR && errno != EAGAIN && errno != EWOULDBLOCK) {
            return Io::closed;
        }
    }
}

void GuestProcess::reap(bool block) {
    if (pid_ <= 0) return;
    int status = 0;
    pid_t r = ::waitpid(pid_, &status, block ? 0 : WNOHANG);
    if (r == pid_ || (r < 0 && errno == ECHILD)) pid_ = -1;
}

void GuestProcess::kill() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        reap(true);
    }
    buffer_.clear();
}

void GuestProcess::shutdown(std::chrono::milliseconds grace) {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    const auto until = std::chrono::steady_clock::now() + grace;
    while (pid_ > 0 && std::chrono::steady_clock::now() < until) {
        reap(false);
        if (pid_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    kill();
}

}  // namespace revel::detail
