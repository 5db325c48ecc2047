#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

namespace shiftup {

struct ProcessResult {
  int exit_code = -1;  // -1 when killed by a signal
  std::string out;
  std::string err;
  bool timed_out = false;
  std::chrono::milliseconds elapsed{0};
};

class SpawnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs `/bin/sh -c command`, feeds `input` to its stdin and collects both output
// streams. A non-positive timeout means no limit. On timeout the whole process
// group is killed.
inline ProcessResult run_shell(const std::string& command, std::string_view input,
                               std::chrono::milliseconds timeout = std::chrono::milliseconds{0}) {
  static const bool sigpipe_ignored = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;

  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (::pipe(in_pipe) != 0) throw SpawnError(std::string("pipe: ") + std::strerror(errno));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw SpawnError(std::string("pipe: ") + std::strerror(errno));
  }
  if (::pipe(err_pipe) != 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw SpawnError(std::string("pipe: ") + std::strerror(errno));
  }

  auto start = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
    throw SpawnError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::signal(SIGPIPE, SIG_DFL);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  int write_fd = in_pipe[1];
  ::fcntl(write_fd, F_SETFL, O_NONBLOCK);
  if (input.empty()) {
    ::close(write_fd);
    write_fd = -1;
  }

  ProcessResult result;
  std::size_t written = 0;
  int read_fds[2] = {out_pipe[0], err_pipe[0]};
  std::string* sinks[2] = {&result.out, &result.err};
  char buf[4096];

  while (read_fds[0] >= 0 || read_fds[1] >= 0) {
    pollfd fds[3];
    int n = 0;
    int map[3];
    for (int k = 0; k < 2; ++k) {
      if (read_fds[k] >= 0) {
        fds[n] = {read_fds[k], POLLIN, 0};
        map[n++] = k;
      }
    }
    if (write_fd >= 0) {
      fds[n] = {write_fd, POLLOUT, 0};
      map[n++] = 2;
    }
    int wait_ms = -1;
    if (timeout.count() > 0) {
      auto left = timeout - std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      if (left.count() <= 0) {
        result.timed_out = true;
        break;
      }
      wait_ms = static_cast<int>(left.count());
    }
    int rc = ::poll(fds, static_cast<nfds_t>(n), wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    for (int k = 0; k < n; ++k) {
      if (!fds[k].revents) continue;
      if (map[k] == 2) {
        auto w = ::write(write_fd, input.data() + written, input.size() - written);
        if (w > 0) written += static_cast<std::size_t>(w);
        if (w < 0 && errno != EAGAIN && errno != EINTR) written = input.size();
        if (written >= input.size()) {
          ::close(write_fd);
          write_fd = -1;
        }
        continue;
      }
      auto r = ::read(fds[k].fd, buf, sizeof buf);
      if (r > 0) {
        sinks[map[k]]->append(buf, static_cast<std::size_t>(r));
      } else if (r == 0 || (errno != EAGAIN && errno != EINTR)) {
        ::close(fds[k].fd);
        read_fds[map[k]] = -1;
      }
    }
  }

  if (write_fd >= 0) ::close(write_fd);
  for (int fd : read_fds)
    if (fd >= 0) ::close(fd);

  int status = 0;
  bool reaped = false;
  while (!result.timed_out && !reaped) {
    pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid || (w < 0 && errno != EINTR)) {
      reaped = true;
      break;
    }
    if (timeout.count() > 0 && std::chrono::steady_clock::now() - start >= timeout) {
      result.timed_out = true;
      break;
    }
    ::usleep(2000);
  }
  if (result.timed_out) ::kill(-pid, SIGKILL);
  if (!reaped) {
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
  }
  result.elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  return result;
}

}  // namespace shiftup
