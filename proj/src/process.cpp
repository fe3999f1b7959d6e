#include "process.hpp"

#include "evoloop/error.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

namespace evoloop::detail {

namespace {

constexpr rlim_t kMaxFileBytes = 256ull * 1024 * 1024;

struct Fd {
    int fd = -1;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

void append_capped(std::string& sink, bool& truncated, const char* data, std::size_t n, std::size_t cap) {
    if (sink.size() < cap) {
        auto room = cap - sink.size();
        sink.append(data, std::min(room, n));
        if (n > room) truncated = true;
    } else if (n > 0) {
        truncated = true;
    }
}

} // namespace

CommandResult run_process(const ProcessSpec& spec) {
    if (spec.argv.empty()) throw Error(ErrorCode::spawn_error, "empty command");

    std::vector<char*> argv;
    for (const auto& a : spec.argv) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    std::vector<char*> envp;
    for (const auto& e : spec.env) envp.push_back(const_cast<char*>(e.c_str()));
    envp.push_back(nullptr);
    const std::string cwd = spec.cwd.string();
    const rlim_t cpu_seconds = static_cast<rlim_t>(spec.timeout.count() / 1000 + 2);

    int out_pipe[2], err_pipe[2], status_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0 ||
        ::pipe2(status_pipe, O_CLOEXEC) != 0)
        throw Error(ErrorCode::spawn_error, std::string("pipe: ") + std::strerror(errno));
    Fd out_r{out_pipe[0]}, out_w{out_pipe[1]}, err_r{err_pipe[0]}, err_w{err_pipe[1]};
    Fd status_r{status_pipe[0]}, status_w{status_pipe[1]};

    const auto started = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::spawn_error, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        rlimit core{0, 0};
        ::setrlimit(RLIMIT_CORE, &core);
        rlimit fsize{kMaxFileBytes, kMaxFileBytes};
        ::setrlimit(RLIMIT_FSIZE, &fsize);
        rlimit cpu{cpu_seconds, cpu_seconds};
        ::setrlimit(RLIMIT_CPU, &cpu);
        int err = 0;
        if (::chdir(cwd.c_str()) != 0) {
            err = errno;
        } else {
            ::execvpe(argv[0], argv.data(), envp.data());
            err = errno;
        }
        ssize_t ignored = ::write(status_pipe[1], &err, sizeof err);
        (void)ignored;
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    out_w.reset();
    err_w.reset();
    status_w.reset();

    int child_errno = 0;
    ssize_t got;
    do {
        got = ::read(status_r.fd, &child_errno, sizeof child_errno);
    } while (got < 0 && errno == EINTR);
    if (got == sizeof child_errno) {
        int status = 0;
        ::waitpid(pid, &status, 0);
        throw Error(ErrorCode::spawn_error, "cannot start '" + spec.argv[0] + "': " + std::strerror(child_errno));
    }

    CommandResult result;
    const auto deadline = started + spec.timeout;
    char buf[8192];
    int status = 0;
    bool reaped = false;
    for (;;) {
        pollfd fds[2];
        nfds_t n = 0;
        if (out_r.fd >= 0) fds[n++] = pollfd{out_r.fd, POLLIN, 0};
        if (err_r.fd >= 0) fds[n++] = pollfd{err_r.fd, POLLIN, 0};
        auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            result.timed_out = true;
            break;
        }
        if (n == 0) {
            // Pipes closed; wait for exit without passing the deadline.
            pid_t r = ::waitpid(pid, &status, WNOHANG);
            if (r == pid) {
                reaped = true;
                break;
            }
            ::usleep(2000);
            continue;
        }
        auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        int ready = ::poll(fds, n, static_cast<int>(std::min<long long>(wait_ms + 1, 100)));
        if (ready < 0 && errno != EINTR) break;
        for (nfds_t i = 0; i < n; ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            bool is_out = fds[i].fd == out_r.fd;
            ssize_t r = ::read(fds[i].fd, buf, sizeof buf);
            if (r > 0) {
                if (is_out)
                    append_capped(result.stdout_text, result.stdout_truncated, buf, static_cast<std::size_t>(r),
                                  spec.max_output_bytes);
                else
                    append_capped(result.stderr_text, result.stderr_truncated, buf, static_cast<std::size_t>(r),
                                  spec.max_output_bytes);
            } else if (r == 0 || (errno != EINTR && errno != EAGAIN)) {
                (is_out ? out_r : err_r).reset();
            }
        }
    }

    // Sweep the group: on timeout this is the kill; otherwise it removes
    // stragglers the program left behind.
    ::kill(-pid, SIGKILL);
    if (!reaped) ::waitpid(pid, &status, 0);
    result.duration =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

    if (result.timed_out) {
        result.killed = true;
        result.exit_code = 128 + SIGKILL;
    } else if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.killed = true;
        result.exit_code = 128 + WTERMSIG(status);
    }
    return result;
}

} // namespace evoloop::detail
