#ifndef DMLLAB_MATRIX_HPP
#define DMLLAB_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace dmllab {

/// Dense row-major matrix of doubles. Row-major suits the row-oriented
/// consumers (datasets, tree traversal); algorithms that sweep columns
/// (coordinate descent) make their own column-major working copies.
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
            if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = data_[i * cols_ + j];
        return c;
    }

    Matrix take_rows(const std::vector<std::size_t>& idx) const {
        Matrix out(idx.size(), cols_);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double* src = row_ptr(idx[r]);
            double* dst = out.row_ptr(r);
            for (std::size_t j = 0; j < cols_; ++j) dst[j] = src[j];
        }
        return out;
    }

    /// New matrix with an extra column prepended (used to pool D with X).
    Matrix with_prepended_column(const std::vector<double>& c) const {
        if (c.size() != rows_) throw std::invalid_argument("with_prepended_column: length mismatch");
        Matrix out(rows_, cols_ + 1);
        for (std::size_t i = 0; i < rows_; ++i) {
            out(i, 0) = c[i];
            const double* src = row_ptr(i);
            for (std::size_t j = 0; j < cols_; ++j) out(i, j + 1) = src[j];
        }
        return out;
    }

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

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Population variance (divides by n).
inline double variance(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

inline double rmse(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("rmse: length mismatch");
    if (pred.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(pred.size()));
}

/// Standard normal quantile (Wichura AS241, double precision).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545703 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double v;
    if (r <= 5.0) {
        r -= 1.6;
        v = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -v : v;
}

inline double sigmoid(double x) {
    // Clamp so the result stays strictly inside (0,1) in double precision.
    if (x > 35.0) x = 35.0;
    if (x < -35.0) x = -35.0;
    return 1.0 / (1.0 + std::exp(-x));
}

} // namespace dmllab

#endif
