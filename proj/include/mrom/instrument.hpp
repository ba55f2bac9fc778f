#ifndef MROM_INSTRUMENT_HPP
#define MROM_INSTRUMENT_HPP

namespace mrom::instrument {

/// Process-wide tallies of the expensive offline kernels. The estimation
/// path must never touch them for a target geometry: reconstruction reads
/// these counters before and after its work and fails loudly if a flow
/// solve or a basis compression slipped in.
struct WorkCount {
    long stokes_operators = 0; // StokesOperator assemblies/factorizations
    long stokes_steps = 0;     // implicit-Euler steps
    long pod_calls = 0;        // basis compressions

    bool operator==(const WorkCount&) const = default;
};

WorkCount snapshot();

// Incremented by the solver/compression implementations.
void count_stokes_operator();
void count_stokes_step();
void count_pod_call();

} // namespace mrom::instrument

#endif
