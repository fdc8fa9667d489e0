#include "kernels_impl.hpp"

#include "harmony/error.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace harmony::simd {

namespace {

bool cpu_has_avx2()
{
#if defined(HARMONY_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable* select_default()
{
    if (const char* env = std::getenv("HARMONY_KERNELS"); env && std::string(env) == "scalar")
        return &detail::scalar_table;
#if defined(HARMONY_BUILD_AVX2)
    if (cpu_has_avx2())
        return &detail::avx2_table;
#endif
    return &detail::scalar_table;
}

std::atomic<const KernelTable*>& active()
{
    static std::atomic<const KernelTable*> table{select_default()};
    return table;
}

} // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

const KernelTable& kernels_for(Isa isa)
{
    switch (isa) {
    case Isa::Scalar:
        return detail::scalar_table;
    case Isa::Avx2:
#if defined(HARMONY_BUILD_AVX2)
        if (cpu_has_avx2())
            return detail::avx2_table;
#endif
        break;
    }
    throw ConfigError("kernel ISA '" + std::string(to_string(isa)) + "' is not available");
}

std::vector<Isa> available_isas()
{
    std::vector<Isa> out{Isa::Scalar};
    if (cpu_has_avx2())
        out.push_back(Isa::Avx2);
    return out;
}

void set_active_isa(Isa isa) { active().store(&kernels_for(isa)); }

std::string_view to_string(Isa isa)
{
    switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

} // namespace harmony::simd
