#ifndef MROM_ERRORS_HPP
#define MROM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mrom {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Violated precondition or incompatible arguments (mesh/metric mismatch, ...).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(what) {}
};

/// Invalid or degenerate geometry (non-positive profile, inverted elements).
class GeometryError : public Error {
public:
    explicit GeometryError(const std::string& what) : Error(what) {}
};

/// Linear solver failed to reach the required residual.
class SolverError : public Error {
public:
    explicit SolverError(const std::string& what) : Error(what) {}
};

/// Requested dimension exceeds the numerical rank of the data.
class RankError : public Error {
public:
    RankError(const std::string& what, int achievable)
        : Error(what), achievable_rank(achievable) {}
    int achievable_rank;
};

/// Reconstruction problem has no unique minimizer (inf-sup constant ~ 0).
class IllPosedError : public Error {
public:
    explicit IllPosedError(const std::string& what) : Error(what) {}
};

/// File format / parsing problems.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

} // namespace mrom

#endif
