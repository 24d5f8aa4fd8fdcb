#include <cstdlib>
#include <string>
#include <string_view>

#include "aquadem/errors.hpp"
#include "aquadem/kernels.hpp"

namespace aquadem::kernels {
namespace {

const Backend* g_active = nullptr;

const Backend* pick(std::string_view name) {
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2") {
    if (!avx2_supported()) {
      throw DomainError("kernel backend avx2 not supported on this CPU");
    }
    return &avx2_backend();
  }
#endif
  if (name == "scalar") return &scalar_backend();
  throw DomainError("unknown kernel backend: " + std::string(name));
}

const Backend* select_default() {
  if (const char* env = std::getenv("AQUADEM_KERNELS")) {
    return pick(env);
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_supported()) return &avx2_backend();
#endif
  return &scalar_backend();
}

}  // namespace

#if defined(__x86_64__) || defined(_M_X64)
bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const Backend& active() {
  if (g_active == nullptr) g_active = select_default();
  return *g_active;
}

void set_backend(std::string_view name) { g_active = pick(name); }

}  // namespace aquadem::kernels
