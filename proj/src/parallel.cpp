#include "pwinv/parallel.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace pwinv {

int thread_count() {
  const char* v = std::getenv("PWINV_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024)
    throw std::invalid_argument("PWINV_THREADS must be a positive integer, got '" +
                                std::string(v) + "'");
  return int(n);
}

}  // namespace pwinv
