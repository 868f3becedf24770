#include "octseg/kernels.hpp"

#include <atomic>

#include "octseg/common.hpp"

namespace octseg::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(OCTSEG_HAVE_AVX2)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* pick(Backend b) {
    switch (b) {
        case Backend::scalar:
            return &scalar_ops();
        case Backend::avx2:
#if defined(OCTSEG_HAVE_AVX2)
            if (cpu_has_avx2()) return &avx2_ops();
#endif
            throw ValidationError("kernels: avx2 backend not available on this CPU/build");
        case Backend::auto_detect:
        default:
#if defined(OCTSEG_HAVE_AVX2)
            if (cpu_has_avx2()) return &avx2_ops();
#endif
            return &scalar_ops();
    }
}

std::atomic<const Ops*>& active_slot() {
    static std::atomic<const Ops*> slot{pick(Backend::auto_detect)};
    return slot;
}

std::atomic<Backend>& selected_slot() {
    static std::atomic<Backend> slot{Backend::auto_detect};
    return slot;
}

}  // namespace

const Ops& active() { return *active_slot().load(std::memory_order_relaxed); }

void select(Backend b) {
    const Ops* ops = pick(b);
    selected_slot().store(b);
    active_slot().store(ops);
    log_debug("kernel backend: %s", ops->name);
}

Backend selected() { return selected_slot().load(); }

bool avx2_available() { return cpu_has_avx2(); }

}  // namespace octseg::kernels
