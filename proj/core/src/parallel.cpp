#include "alignkit/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace alignkit {

int worker_count() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("ALIGNKIT_THREADS");
  if (env == nullptr || *env == '\0') return static_cast<int>(hw);
  int n = 0;
  auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), n);
  if (ec != std::errc{} || n < 1) return 1;
  return n;
}

}  // namespace alignkit
