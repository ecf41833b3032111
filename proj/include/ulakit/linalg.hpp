#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "ulakit/error.hpp"

namespace ulakit {

using Vector = std::vector<double>;

/// Dense row-major matrix. Only what the small d x d coefficient matrices
/// need; heavier linear algebra goes through Eigen at the call site.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t d, double scale = 1.0) {
        Matrix m(d, d);
        for (std::size_t i = 0; i < d; ++i) m(i, i) = scale;
        return m;
    }

    static Matrix diagonal(std::span<const double> diag) {
        Matrix m(diag.size(), diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    bool is_diagonal(double tol = 0.0) const noexcept {
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                if (i != j && std::fabs((*this)(i, j)) > tol) return false;
        return true;
    }

    /// out = this * x
    void apply(std::span<const double> x, std::span<double> out) const noexcept {
        for (std::size_t i = 0; i < rows_; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) acc += data_[i * cols_ + j] * x[j];
            out[i] = acc;
        }
    }

    Vector apply(std::span<const double> x) const {
        require_dim(x.size(), cols_, "Matrix::apply");
        Vector out(rows_);
        apply(x, out);
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm2(std::span<const double> a) noexcept { return dot(a, a); }

inline double norm(std::span<const double> a) noexcept { return std::sqrt(norm2(a)); }

inline double distance(std::span<const double> a, std::span<const double> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

}  // namespace ulakit
