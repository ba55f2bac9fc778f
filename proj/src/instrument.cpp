#include "mrom/instrument.hpp"

#include <atomic>

namespace mrom::instrument {

namespace {

std::atomic<long> g_stokes_operators{0};
std::atomic<long> g_stokes_steps{0};
std::atomic<long> g_pod_calls{0};

} // namespace

WorkCount snapshot() {
    return {g_stokes_operators.load(), g_stokes_steps.load(), g_pod_calls.load()};
}

void count_stokes_operator() { ++g_stokes_operators; }
void count_stokes_step() { ++g_stokes_steps; }
void count_pod_call() { ++g_pod_calls; }

} // namespace mrom::instrument
