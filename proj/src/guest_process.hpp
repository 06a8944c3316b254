#pragma once

#include <sys/types.h>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace revel::detail {

/// A child process talking line-delimited text over one socket bound to its
/// stdin and stdout. stderr is inherited.
class GuestProcess {
public:
    enum class Io { ok, timeout, closed };

    explicit GuestProcess(const std::vector<std::string>& argv);
    GuestProcess(const GuestProcess&) = delete;
    GuestProcess& operator=(const GuestProcess&) = delete;
    ~GuestProcess();

    Io write_line(const std::string& line, std::chrono::steady_clock::time_point deadline);
    Io read_line(std::string& line, std::chrono::steady_clock::time_point deadline);

    /// SIGKILL and reap.
    void kill();
    /// Close the channel, give the child a grace period to exit, then kill.
    void shutdown(std::chrono::milliseconds grace = std::chrono::milliseconds(500));

    bool running() const { return pid_ > 0; }

private:
    void reap(bool block);

    pid_t pid_ = -1;
    int fd_ = -1;
    std::string buffer_;
};

}  // namespace revel::detail
