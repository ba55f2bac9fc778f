#ifndef MROM_ROM_HPP
#define MROM_ROM_HPP

#include "mrom/subspace.hpp"

#include <string>
#include <vector>

namespace mrom {

enum class ErrorMode { worst_case, mean_square };

ErrorMode error_mode_from_string(const std::string& s);

struct PodResult {
    Subspace space;
    /// Full POD spectrum sigma_1 >= sigma_2 >= ... (length = snapshot count,
    /// negative eigenvalues clamped to zero before the square root).
    Eigen::VectorXd singular_values;
};

/// Proper orthogonal decomposition by the method of snapshots: eigenvalue
/// decomposition of the L2 Gramian, followed by re-orthonormalization.
/// Throws RankError (naming the achievable n) if n exceeds the numerical
/// rank of the snapshot set.
PodResult pod(const std::vector<Field>& snapshots,
              const std::shared_ptr<const MassMatrix>& metric, int n);

/// Orthogonal projection of u onto V.
Field project(const Field& u, const Subspace& V);

/// Empirical manifold approximation error over a snapshot set:
/// worst-case max ||u - P_V u||, or mean-square sqrt(mean ||u - P_V u||^2).
double manifold_error(const std::vector<Field>& snapshots, const Subspace& V, ErrorMode mode);

} // namespace mrom

#endif
