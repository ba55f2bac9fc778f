#ifndef MROM_IO_HPP
#define MROM_IO_HPP

#include "mrom/morpho.hpp"
#include "mrom/subspace.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace mrom::io {

/// Render a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

/// Atomic file write: `writer` streams into a temporary file in the target
/// directory, which replaces `path` by rename only after a successful flush.
/// Parent directories are created as needed. Throws IoError on any failure;
/// the target is never left half-written.
void atomic_write(const std::string& path, bool binary,
                  const std::function<void(std::ostream&)>& writer);

// --------------------------------------------------------------------------
// Binary matrix block: magic "MROM1", u32 row count, u32 row length, then
// row-major little-endian 64-bit floats. Snapshot and basis files store one
// field per row.
// --------------------------------------------------------------------------

void write_matrix(std::ostream& os, const Eigen::MatrixXd& rows);
Eigen::MatrixXd read_matrix(std::istream& is);

/// Snapshot file: one binary matrix block, one row per snapshot.
void write_snapshots_file(const std::string& path, const std::vector<Field>& snapshots);
Eigen::MatrixXd read_snapshots_matrix(const std::string& path);
std::vector<Field> read_snapshots_file(const std::string& path,
                                       std::shared_ptr<const Mesh> mesh, FieldKind kind);

/// Basis file: snapshot-format block (one row per basis vector) followed by a
/// footer line `SV k s_1 ... s_k` carrying the POD singular values.
struct BasisFile {
    Eigen::MatrixXd basis; // dof x n
    Eigen::VectorXd singular_values;
};

void write_basis_file(const std::string& path, const Eigen::MatrixXd& basis,
                      const Eigen::VectorXd& singular_values);
BasisFile read_basis_file(const std::string& path);

// --------------------------------------------------------------------------
// CSV files
// --------------------------------------------------------------------------

/// Measurement vector: header `voxel_id,value`, one row per voxel. Rows may
/// appear in any order but the ids must form 0..m-1 without gaps.
void write_measurements_file(const std::string& path, const Eigen::VectorXd& y);
Eigen::VectorXd read_measurements_file(const std::string& path);

/// Numeric matrix as plain CSV (no header); used for distance matrices.
void write_csv_matrix(std::ostream& os, const Eigen::MatrixXd& M);
void write_csv_matrix_file(const std::string& path, const Eigen::MatrixXd& M);
Eigen::MatrixXd read_csv_matrix_file(const std::string& path);

// --------------------------------------------------------------------------
// Geometry descriptor file: `key = value` lines (config syntax) with exactly
// the keys throat_radius, throat_length, throat_center, length, height.
// --------------------------------------------------------------------------

void write_geometry_file(const std::string& path, const GeometryDescriptor& g);
GeometryDescriptor read_geometry_file(const std::string& path);

// --------------------------------------------------------------------------
// Embedding model file: text header (p, eigenvalues, template coordinates,
// feature grid, template descriptors) followed by the feature-to-embedding
// map as a binary matrix block.
// --------------------------------------------------------------------------

void write_embedding_file(const std::string& path, const EmbeddingModel& model);
EmbeddingModel read_embedding_file(const std::string& path);

// --------------------------------------------------------------------------
// Config files: line-based `key = value` with `[section]` headers. `#`
// starts a comment. Keys are addressed as `section.key` (bare `key` before
// the first section header). Duplicate keys are an error. Every key must be
// consumed by a getter before reject_unknown() passes: misspelled or
// unsupported keys never go silently ignored.
// --------------------------------------------------------------------------

class Config {
public:
    static Config parse(std::istream& is, const std::string& origin = "<config>");
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const;

    /// Typed getters; throw IoError when the key is missing or malformed.
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    /// Comma- or whitespace-separated list of numbers.
    std::vector<double> get_doubles(const std::string& key) const;

    /// Fallback variants: return `fallback` when the key is absent.
    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    double get_double_or(const std::string& key, double fallback) const;
    int get_int_or(const std::string& key, int fallback) const;
    std::vector<double> get_doubles_or(const std::string& key,
                                       const std::vector<double>& fallback) const;

    /// Throws IoError naming every key no getter ever asked for.
    void reject_unknown() const;

    /// Canonical text rendering (sorted `key = value` lines), used for
    /// manifest hashing: two configs with equal canonical text behave
    /// identically.
    std::string canonical_text() const;

private:
    std::string origin_;
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;

    const std::string* find(const std::string& key) const;
};

/// FNV-1a 64-bit hash of a string, printed as 16 hex digits; used to stamp
/// config identity into manifests.
std::string fnv1a_hex(const std::string& text);

} // namespace mrom::io

#endif
