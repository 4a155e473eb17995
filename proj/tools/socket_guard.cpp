// LD_PRELOAD shim for tests: refuses socket() and connect() and records each
// attempt in the file named by REFSWAP_SOCKET_GUARD_LOG.

#include <errno.h>
#include <fcntl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace {

void record(const char* what, int detail) {
  const char* path = std::getenv("REFSWAP_SOCKET_GUARD_LOG");
  if (!path) return;
  int fd = ::open(path, O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) return;
  char line[64];
  int n = std::snprintf(line, sizeof line, "%s %d\n", what, detail);
  if (n > 0) (void)!::write(fd, line, static_cast<std::size_t>(n));
  ::close(fd);
}

}  // namespace

extern "C" int socket(int domain, int, int) {
  record("socket", domain);
  errno = EACCES;
  return -1;
}

extern "C" int connect(int fd, const struct sockaddr*, socklen_t) {
  record("connect", fd);
  errno = EACCES;
  return -1;
}
