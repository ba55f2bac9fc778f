#include "mrom/io.hpp"

#include "mrom/errors.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace mrom::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "binary files are little-endian; a big-endian port needs byte swaps");

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Atomic writes
// ---------------------------------------------------------------------------

void atomic_write(const std::string& path, bool binary,
                  const std::function<void(std::ostream&)>& writer) {
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec)
            throw IoError("cannot create directory '" + target.parent_path().string() +
                          "': " + ec.message());
    }
    const fs::path tmp = target.string() + ".tmp";
    try {
        std::ofstream os(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
        if (!os)
            throw IoError("cannot open '" + tmp.string() + "' for writing");
        writer(os);
        os.flush();
        if (!os)
            throw IoError("write to '" + tmp.string() + "' failed");
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        std::error_code ec2;
        fs::remove(tmp, ec2);
        throw IoError("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
    }
}

// ---------------------------------------------------------------------------
// Binary matrix block
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'M', 'R', 'O', 'M', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw IoError(std::string("matrix block: truncated ") + what);
    return v;
}

} // namespace

void write_matrix(std::ostream& os, const Eigen::MatrixXd& rows) {
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, static_cast<std::uint32_t>(rows.rows()));
    write_u32(os, static_cast<std::uint32_t>(rows.cols()));
    Eigen::VectorXd row(rows.cols());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        row = rows.row(i);
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(sizeof(double)) * row.size());
    }
    if (!os)
        throw IoError("matrix block: write failed");
}

Eigen::MatrixXd read_matrix(std::istream& is) {
    char magic[sizeof(kMagic)] = {};
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("matrix block: bad magic (not an MROM1 file)");
    const std::uint32_t n_rows = read_u32(is, "row count");
    const std::uint32_t n_cols = read_u32(is, "row length");
    if (static_cast<std::uint64_t>(n_rows) * n_cols > (1u << 28))
        throw IoError("matrix block: implausible size " + std::to_string(n_rows) + "x" +
                      std::to_string(n_cols));
    Eigen::MatrixXd M(n_rows, n_cols);
    Eigen::VectorXd row(n_cols);
    for (std::uint32_t i = 0; i < n_rows; ++i) {
        if (!is.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(sizeof(double)) * row.size()))
            throw IoError("matrix block: truncated row " + std::to_string(i));
        M.row(i) = row;
    }
    return M;
}

void write_snapshots_file(const std::string& path, const std::vector<Field>& snapshots) {
    if (snapshots.empty())
        throw ContractError("write_snapshots_file: empty snapshot list");
    const Eigen::Index dof = snapshots.front().dof();
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(snapshots.size()), dof);
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
        if (snapshots[i].dof() != dof)
            throw ContractError("write_snapshots_file: inconsistent snapshot lengths");
        rows.row(static_cast<Eigen::Index>(i)) = snapshots[i].coeffs;
    }
    atomic_write(path, true, [&](std::ostream& os) { write_matrix(os, rows); });
}

Eigen::MatrixXd read_snapshots_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open '" + path + "' for reading");
    return read_matrix(is);
}

std::vector<Field> read_snapshots_file(const std::string& path,
                                       std::shared_ptr<const Mesh> mesh, FieldKind kind) {
    const Eigen::MatrixXd rows = read_snapshots_matrix(path);
    std::vector<Field> snaps;
    snaps.reserve(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        Field f(mesh, kind, rows.row(i).transpose());
        f.validate();
        snaps.push_back(std::move(f));
    }
    return snaps;
}

void write_basis_file(const std::string& path, const Eigen::MatrixXd& basis,
                      const Eigen::VectorXd& singular_values) {
    atomic_write(path, true, [&](std::ostream& os) {
        write_matrix(os, basis.transpose());
        os << "SV " << singular_values.size();
        for (Eigen::Index i = 0; i < singular_values.size(); ++i)
            os << " " << format_double(singular_values[i]);
        os << "\n";
    });
}

BasisFile read_basis_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open '" + path + "' for reading");
    BasisFile out;
    out.basis = read_matrix(is).transpose();
    std::string tag;
    int k = 0;
    if (!(is >> tag >> k) || tag != "SV" || k < 0)
        throw IoError("basis file '" + path + "': missing SV footer");
    out.singular_values.resize(k);
    for (int i = 0; i < k; ++i)
        if (!(is >> out.singular_values[i]))
            throw IoError("basis file '" + path + "': truncated SV footer");
    return out;
}

// ---------------------------------------------------------------------------
// CSV files
// ---------------------------------------------------------------------------

void write_measurements_file(const std::string& path, const Eigen::VectorXd& y) {
    atomic_write(path, false, [&](std::ostream& os) {
        os << "voxel_id,value\n";
        for (Eigen::Index i = 0; i < y.size(); ++i)
            os << i << "," << format_double(y[i]) << "\n";
    });
}

Eigen::VectorXd read_measurements_file(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::pair<long, double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty())
            continue;
        if (line_no == 1 && line.find("voxel_id") != std::string::npos)
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        long id = 0;
        double value = 0.0;
        if (!(ss >> id >> value))
            throw IoError("measurements '" + path + "': malformed line " +
                          std::to_string(line_no));
        rows.emplace_back(id, value);
    }
    Eigen::VectorXd y = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(rows.size()),
                                                  std::numeric_limits<double>::quiet_NaN());
    for (const auto& [id, value] : rows) {
        if (id < 0 || id >= y.size())
            throw IoError("measurements '" + path + "': voxel id " + std::to_string(id) +
                          " out of range 0.." + std::to_string(y.size() - 1));
        if (!std::isnan(y[id]))
            throw IoError("measurements '" + path + "': duplicate voxel id " +
                          std::to_string(id));
        y[id] = value;
    }
    return y;
}

void write_csv_matrix(std::ostream& os, const Eigen::MatrixXd& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            os << (j ? "," : "") << format_double(M(i, j));
        os << "\n";
    }
}

void write_csv_matrix_file(const std::string& path, const Eigen::MatrixXd& M) {
    atomic_write(path, false, [&](std::ostream& os) { write_csv_matrix(os, M); });
}

Eigen::MatrixXd read_csv_matrix_file(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        std::vector<double> row;
        double v;
        while (ss >> v)
            row.push_back(v);
        if (!row.empty())
            rows.push_back(std::move(row));
    }
    if (rows.empty())
        return Eigen::MatrixXd(0, 0);
    const std::size_t n_cols = rows.front().size();
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != n_cols)
            throw IoError("csv '" + path + "': ragged row " + std::to_string(i + 1));
        for (std::size_t j = 0; j < n_cols; ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return M;
}

// ---------------------------------------------------------------------------
// Geometry descriptor file
// ---------------------------------------------------------------------------

void write_geometry_file(const std::string& path, const GeometryDescriptor& g) {
    atomic_write(path, false, [&](std::ostream& os) {
        os << "throat_radius = " << format_double(g.throat_radius) << "\n";
        os << "throat_length = " << format_double(g.throat_length) << "\n";
        os << "throat_center = " << format_double(g.throat_center) << "\n";
        os << "length = " << format_double(g.length) << "\n";
        os << "height = " << format_double(g.height) << "\n";
    });
}

GeometryDescriptor read_geometry_file(const std::string& path) {
    const Config cfg = Config::parse_file(path);
    GeometryDescriptor g;
    g.throat_radius = cfg.get_double("throat_radius");
    g.throat_length = cfg.get_double("throat_length");
    g.throat_center = cfg.get_double("throat_center");
    g.length = cfg.get_double("length");
    g.height = cfg.get_double("height");
    cfg.reject_unknown();
    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// Embedding model file
// ---------------------------------------------------------------------------

void write_embedding_file(const std::string& path, const EmbeddingModel& model) {
    model.validate();
    atomic_write(path, true, [&](std::ostream& os) {
        const int K = static_cast<int>(model.templates.size());
        os << "EMBED1\n";
        os << "p " << model.p << "\n";
        os << "K " << K << "\n";
        os << "padded " << (model.padded ? 1 : 0) << "\n";
        os << "discarded_mass " << format_double(model.discarded_mass) << "\n";
        os << "eigenvalues " << model.eigenvalues.size();
        for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i)
            os << " " << format_double(model.eigenvalues[i]);
        os << "\n";
        os << "grid " << format_double(model.grid.x0) << " " << format_double(model.grid.y0)
           << " " << format_double(model.grid.spacing) << " " << model.grid.nx << " "
           << model.grid.ny << "\n";
        for (const GeometryDescriptor& g : model.templates)
            os << "template " << format_double(g.throat_radius) << " "
               << format_double(g.throat_length) << " " << format_double(g.throat_center)
               << " " << format_double(g.length) << " " << format_double(g.height) << "\n";
        os << "coords\n";
        for (Eigen::Index i = 0; i < model.coords.rows(); ++i) {
            for (Eigen::Index j = 0; j < model.coords.cols(); ++j)
                os << (j ? " " : "") << format_double(model.coords(i, j));
            os << "\n";
        }
        os << "wmap\n";
        write_matrix(os, model.w_map.transpose());
    });
}

EmbeddingModel read_embedding_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open '" + path + "' for reading");
    const auto expect = [&](const char* keyword) {
        std::string word;
        if (!(is >> word) || word != keyword)
            throw IoError("embedding '" + path + "': expected '" + keyword + "', got '" +
                          word + "'");
    };
    expect("EMBED1");
    EmbeddingModel model;
    int K = 0;
    int padded = 0;
    expect("p");
    is >> model.p;
    expect("K");
    is >> K;
    expect("padded");
    is >> padded;
    model.padded = padded != 0;
    expect("discarded_mass");
    is >> model.discarded_mass;
    expect("eigenvalues");
    int n_eig = 0;
    is >> n_eig;
    if (!is || model.p < 1 || K < 1 || n_eig < 0)
        throw IoError("embedding '" + path + "': malformed header");
    model.eigenvalues.resize(n_eig);
    for (int i = 0; i < n_eig; ++i)
        if (!(is >> model.eigenvalues[i]))
            throw IoError("embedding '" + path + "': truncated eigenvalues");
    expect("grid");
    if (!(is >> model.grid.x0 >> model.grid.y0 >> model.grid.spacing >> model.grid.nx >>
          model.grid.ny))
        throw IoError("embedding '" + path + "': malformed grid line");
    model.templates.resize(K);
    for (int k = 0; k < K; ++k) {
        expect("template");
        GeometryDescriptor& g = model.templates[k];
        if (!(is >> g.throat_radius >> g.throat_length >> g.throat_center >> g.length >>
              g.height))
            throw IoError("embedding '" + path + "': malformed template " + std::to_string(k));
        g.validate();
    }
    expect("coords");
    model.coords.resize(model.p, K);
    for (int i = 0; i < model.p; ++i)
        for (int j = 0; j < K; ++j)
            if (!(is >> model.coords(i, j)))
                throw IoError("embedding '" + path + "': truncated coordinates");
    expect("wmap");
    // The binary block begins right after the newline terminating "wmap".
    is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    model.w_map = read_matrix(is).transpose();
    model.validate();
    return model;
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

} // namespace

Config Config::parse(std::istream& is, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw IoError(origin + ":" + std::to_string(line_no) +
                              ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw IoError(origin + ":" + std::to_string(line_no) + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(origin + ":" + std::to_string(line_no) +
                          ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw IoError(origin + ":" + std::to_string(line_no) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (!cfg.values_.emplace(full, value).second)
            throw IoError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + full +
                          "'");
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open '" + path + "' for reading");
    return parse(is, path);
}

Config Config::parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
}

const std::string* Config::find(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
        return nullptr;
    consumed_.insert(key);
    return &it->second;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::get_string(const std::string& key) const {
    const std::string* v = find(key);
    if (!v)
        throw IoError(origin_ + ": missing key '" + key + "'");
    return *v;
}

double Config::get_double(const std::string& key) const {
    const std::string text = get_string(key);
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw IoError(origin_ + ": key '" + key + "' is not a number: '" + text + "'");
    }
    if (trim(text.substr(pos)) != "")
        throw IoError(origin_ + ": key '" + key + "' has trailing junk: '" + text + "'");
    return v;
}

int Config::get_int(const std::string& key) const {
    const double v = get_double(key);
    const int i = static_cast<int>(std::llround(v));
    if (static_cast<double>(i) != v)
        throw IoError(origin_ + ": key '" + key + "' is not an integer");
    return i;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    std::string text = get_string(key);
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream ss(text);
    std::vector<double> out;
    double v;
    while (ss >> v)
        out.push_back(v);
    if (!ss.eof())
        throw IoError(origin_ + ": key '" + key + "' is not a number list");
    if (out.empty())
        throw IoError(origin_ + ": key '" + key + "' is an empty list");
    return out;
}

std::string Config::get_string_or(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

double Config::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

int Config::get_int_or(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::vector<double> Config::get_doubles_or(const std::string& key,
                                           const std::vector<double>& fallback) const {
    return has(key) ? get_doubles(key) : fallback;
}

void Config::reject_unknown() const {
    std::string unknown;
    for (const auto& [key, value] : values_)
        if (!consumed_.count(key))
            unknown += (unknown.empty() ? "" : ", ") + ("'" + key + "'");
    if (!unknown.empty())
        throw IoError(origin_ + ": unknown keys: " + unknown);
}

std::string Config::canonical_text() const {
    std::string out;
    for (const auto& [key, value] : values_)
        out += key + " = " + value + "\n";
    return out;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace mrom::io
