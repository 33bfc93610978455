#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace occam {

/// Dense column-major matrix. Columns are contiguous so a variable's samples
/// can be handed out as a span without copying.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_columns(const std::vector<std::vector<double>>& columns) {
        const std::size_t rows = columns.empty() ? 0 : columns.front().size();
        Matrix m(rows, columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) {
            assert(columns[c].size() == rows);
            for (std::size_t r = 0; r < rows; ++r) m(r, c) = columns[c][r];
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[c * rows_ + r]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[c * rows_ + r]; }

    std::span<double> col(std::size_t c) noexcept { return {data_.data() + c * rows_, rows_}; }
    std::span<const double> col(std::size_t c) const noexcept { return {data_.data() + c * rows_, rows_}; }

    std::vector<double> row(std::size_t r) const {
        std::vector<double> out(cols_);
        for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
        return out;
    }

    /// Copy of the selected columns, in the given order.
    Matrix select_columns(std::span<const std::size_t> columns) const {
        Matrix out(rows_, columns.size());
        for (std::size_t i = 0; i < columns.size(); ++i) {
            auto src = col(columns[i]);
            std::copy(src.begin(), src.end(), out.col(i).begin());
        }
        return out;
    }

    /// Copy of the selected rows, in the given order.
    Matrix select_rows(std::span<const std::size_t> rows) const {
        Matrix out(rows.size(), cols_);
        for (std::size_t c = 0; c < cols_; ++c)
            for (std::size_t i = 0; i < rows.size(); ++i) out(i, c) = (*this)(rows[i], c);
        return out;
    }

    void append_column(std::span<const double> values) {
        assert(values.size() == rows_ || cols_ == 0);
        if (cols_ == 0) rows_ = values.size();
        data_.insert(data_.end(), values.begin(), values.end());
        ++cols_;
    }

    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace occam
