#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace irr {

// Error categories shared by every module. All derive from std::runtime_error
// or std::invalid_argument so callers can catch broadly.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidBasis : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct UndefinedMetric : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (!std::isfinite(fill)) throw InvalidInput("Matrix: non-finite fill value");
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionMismatch("Matrix: entry count does not match rows*cols");
        if (!all_finite()) throw InvalidInput("Matrix: non-finite entry");
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw DimensionMismatch("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
        if (!all_finite()) throw InvalidInput("Matrix: non-finite entry");
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    static Matrix from_columns(std::span<const Vector> columns) {
        if (columns.empty()) return {};
        Matrix m(columns.front().size(), columns.size());
        for (std::size_t j = 0; j < columns.size(); ++j) m.set_col(j, columns[j]);
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    [[nodiscard]] std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    [[nodiscard]] Vector col(std::size_t j) const {
        Vector v(rows_);
        for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
        return v;
    }

    void set_col(std::size_t j, std::span<const double> v) {
        if (v.size() != rows_) throw DimensionMismatch("Matrix::set_col: length mismatch");
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
    }

    /// First `count` columns.
    [[nodiscard]] Matrix leading_cols(std::size_t count) const {
        if (count > cols_) throw DimensionMismatch("Matrix::leading_cols: too many columns");
        Matrix m(rows_, count);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < count; ++j) m(i, j) = (*this)(i, j);
        return m;
    }

    [[nodiscard]] Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
    }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o, "operator+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same_shape(o, "operator-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    Matrix& operator*=(double s) noexcept {
        for (double& x : data_) x *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    void check_same_shape(const Matrix& o, const char* what) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw DimensionMismatch(std::string("Matrix::") + what + ": shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Vector helpers

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::span<double> x, double s) {
    for (double& v : x) v *= s;
}

// ---------------------------------------------------------------------------
// Products

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// aᵀ b without forming the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionMismatch("matmul_tn: row counts differ");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto ak = a.row(k);
        auto bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            auto ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

inline Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw DimensionMismatch("matvec: length mismatch");
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

/// aᵀ x
inline Vector matvec_t(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw DimensionMismatch("matvec_t: length mismatch");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) axpy(x[i], a.row(i), y);
    return y;
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.data()) m = std::max(m, std::abs(x));
    return m;
}

inline std::vector<double> column_norms(const Matrix& a) {
    std::vector<double> n(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) n[j] += r[j] * r[j];
    }
    for (double& x : n) x = std::sqrt(x);
    return n;
}

// ---------------------------------------------------------------------------
// Serialization: CSV and the "SSM1" binary layout
// (magic, u64 rows, u64 cols, f64 entries; all little-endian, row-major).

namespace detail {

template <typename T>
T to_little_endian(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    } else {
        return v;
    }
}

template <typename T>
void write_le(std::ostream& os, T v) {
    v = to_little_endian(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("binary matrix: truncated stream");
    return to_little_endian(v);
}

inline bool parse_double(const std::string& tok, double& out) {
    std::size_t used = 0;
    try {
        out = std::stod(tok, &used);
    } catch (...) {
        return false;
    }
    while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
    return used == tok.size();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline void write_binary(std::ostream& os, const Matrix& m) {
    os.write("SSM1", 4);
    detail::write_le<std::uint64_t>(os, m.rows());
    detail::write_le<std::uint64_t>(os, m.cols());
    for (double x : m.data()) detail::write_le<double>(os, x);
}

inline Matrix read_binary(std::istream& is) {
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SSM1", 4) != 0) throw DataError("binary matrix: bad magic");
    const auto rows = detail::read_le<std::uint64_t>(is);
    const auto cols = detail::read_le<std::uint64_t>(is);
    if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) throw DataError("binary matrix: implausible shape");
    std::vector<double> data(rows * cols);
    for (double& x : data) x = detail::read_le<double>(is);
    try {
        return Matrix(rows, cols, std::move(data));
    } catch (const InvalidInput& e) {
        throw DataError(std::string("binary matrix: ") + e.what());
    }
}

inline void write_csv(std::ostream& os, const Matrix& m) {
    os.precision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << m(i, j);
        }
        os << '\n';
    }
}

/// Reads a numeric CSV. A first row that does not parse as numbers is treated as a header.
inline Matrix read_csv(std::istream& is) {
    std::vector<double> data;
    std::size_t cols = 0, rows = 0;
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto toks = detail::split_csv_line(line);
        std::vector<double> vals(toks.size());
        bool numeric = true;
        for (std::size_t k = 0; k < toks.size(); ++k)
            if (!detail::parse_double(toks[k], vals[k])) numeric = false;
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw DataError("csv matrix: non-numeric entry on line " + std::to_string(lineno));
        }
        first = false;
        if (rows == 0) cols = vals.size();
        if (vals.size() != cols) throw DataError("csv matrix: ragged row on line " + std::to_string(lineno));
        data.insert(data.end(), vals.begin(), vals.end());
        ++rows;
    }
    try {
        return Matrix(rows, cols, std::move(data));
    } catch (const InvalidInput& e) {
        throw DataError(std::string("csv matrix: ") + e.what());
    }
}

inline void save_matrix(const std::string& path, const Matrix& m) {
    const bool csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
    std::ofstream os(path, csv ? std::ios::out : std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    csv ? write_csv(os, m) : write_binary(os, m);
}

inline Matrix load_matrix(const std::string& path) {
    const bool csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
    std::ifstream is(path, csv ? std::ios::in : std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    return csv ? read_csv(is) : read_binary(is);
}

}  // namespace irr
