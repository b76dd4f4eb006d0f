#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "perfest/errors.hpp"

namespace perfest {

class Matrix;

// Non-owning view over a contiguous row range of a row-major matrix.
class MatrixView {
  public:
    MatrixView() = default;
    MatrixView(const double* data, std::size_t rows, std::size_t cols)
        : data_(data), rows_(rows), cols_(cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_ + r * cols_, cols_};
    }

    MatrixView rows_view(std::size_t begin, std::size_t count) const {
        if (begin + count > rows_) throw ValidationError("matrix view range out of bounds");
        return {data_ + begin * cols_, count, cols_};
    }

  private:
    const double* data_ = nullptr;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

// Dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) {
        return {data_.data() + r * cols_, cols_};
    }

    MatrixView view() const { return {data_.data(), rows_, cols_}; }
    MatrixView rows_view(std::size_t begin, std::size_t count) const {
        return view().rows_view(begin, count);
    }

    const std::vector<double>& data() const { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Stacks b's rows below a's. Column counts must agree.
inline Matrix concat_rows(MatrixView a, MatrixView b) {
    if (a.cols() != b.cols()) throw ValidationError("concat_rows: column count mismatch");
    Matrix out(a.rows() + b.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c) out(a.rows() + r, c) = b(r, c);
    return out;
}

}  // namespace perfest
