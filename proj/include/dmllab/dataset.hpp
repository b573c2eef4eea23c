#ifndef DMLLAB_DATASET_HPP
#define DMLLAB_DATASET_HPP

#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmllab/matrix.hpp"

namespace dmllab {

enum class TreatmentKind { binary, continuous };

/// Observed data (Y, D, X): n outcomes, n treatments, n x p covariates.
struct Dataset {
    std::vector<double> y;
    std::vector<double> d;
    Matrix x;
    TreatmentKind treatment_kind = TreatmentKind::continuous;

    std::size_t n() const { return y.size(); }
    std::size_t p() const { return x.cols(); }

    void validate() const {
        const std::size_t n_ = y.size();
        if (n_ < 2) throw std::invalid_argument("Dataset: n must be >= 2");
        if (d.size() != n_) throw std::invalid_argument("Dataset: y and d lengths differ");
        if (x.rows() != n_) throw std::invalid_argument("Dataset: x row count differs from n");
        if (x.cols() < 1) throw std::invalid_argument("Dataset: p must be >= 1");
        if (!all_finite(y) || !all_finite(d) || !x.all_finite())
            throw std::invalid_argument("Dataset: non-finite entries");
        if (treatment_kind == TreatmentKind::binary) {
            bool any0 = false, any1 = false;
            for (double v : d) {
                if (v == 0.0) any0 = true;
                else if (v == 1.0) any1 = true;
                else throw std::invalid_argument("Dataset: binary treatment has value not in {0,1}");
            }
            if (!any0 || !any1)
                throw std::invalid_argument("Dataset: binary treatment needs both classes");
        }
    }
};

/// Ground truth attached to a synthetic Dataset.
struct DgpTruth {
    double theta0 = 0.0;
    std::vector<double> ell0;   // E[Y|X] per row
    std::vector<double> m0;     // E[D|X] per row (propensity when binary)
    std::vector<double> g0_0;   // E[Y|D=0,X]
    std::vector<double> g0_1;   // E[Y|D=1,X]
    std::vector<double> eps;    // realized outcome noise
    std::vector<double> v;      // realized treatment residual
};

/// Rows selected in idx order. The both-classes rule is deliberately not
/// re-checked here; consumers that need both classes re-validate.
inline Dataset subset(const Dataset& data, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw std::invalid_argument("subset: empty index set");
    for (std::size_t i : idx)
        if (i >= data.n()) throw std::invalid_argument("subset: index out of range");
    Dataset out;
    out.treatment_kind = data.treatment_kind;
    out.y.reserve(idx.size());
    out.d.reserve(idx.size());
    for (std::size_t i : idx) {
        out.y.push_back(data.y[i]);
        out.d.push_back(data.d[i]);
    }
    out.x = data.x.take_rows(idx);
    return out;
}

namespace detail {
inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col,
                         const std::string& name) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        std::ostringstream msg;
        msg << "CSV parse failure at data row " << row + 1 << ", column '" << name
            << "' (index " << col + 1 << "): '" << cell << "'";
        throw std::invalid_argument(msg.str());
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}
} // namespace detail

/// Reads a dataset from CSV with header `y,d,x1,...,xp` (any column
/// order). Aborts with row/column diagnostics on parse failure.
inline Dataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("CSV: missing header row");
    const auto header = detail::split_csv_line(line);
    long y_col = -1, d_col = -1;
    std::vector<long> x_cols(header.size(), -1);
    std::size_t p = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
        const std::string& h = header[j];
        if (h == "y") y_col = static_cast<long>(j);
        else if (h == "d") d_col = static_cast<long>(j);
        else if (h.size() > 1 && h[0] == 'x') {
            std::size_t k = 0;
            try {
                k = std::stoul(h.substr(1));
            } catch (const std::exception&) {
                throw std::invalid_argument("CSV: unrecognized column '" + h + "'");
            }
            if (k < 1) throw std::invalid_argument("CSV: covariate columns start at x1");
            if (k > p) p = k;
            x_cols[j] = static_cast<long>(k - 1);
        } else {
            throw std::invalid_argument("CSV: unrecognized column '" + h + "'");
        }
    }
    if (y_col < 0 || d_col < 0 || p == 0)
        throw std::invalid_argument("CSV: header must contain y, d and x1..xp");

    std::vector<std::vector<double>> rows;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            std::ostringstream msg;
            msg << "CSV: data row " << row + 1 << " has " << cells.size() << " cells, expected "
                << header.size();
            throw std::invalid_argument(msg.str());
        }
        std::vector<double> parsed(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j)
            parsed[j] = detail::parse_cell(cells[j], row, j, header[j]);
        rows.push_back(std::move(parsed));
        ++row;
    }

    Dataset out;
    out.y.resize(rows.size());
    out.d.resize(rows.size());
    out.x = Matrix(rows.size(), p);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.y[i] = rows[i][static_cast<std::size_t>(y_col)];
        out.d[i] = rows[i][static_cast<std::size_t>(d_col)];
        for (std::size_t j = 0; j < header.size(); ++j)
            if (x_cols[j] >= 0) out.x(i, static_cast<std::size_t>(x_cols[j])) = rows[i][j];
    }
    bool binary = true;
    for (double v : out.d)
        if (v != 0.0 && v != 1.0) binary = false;
    out.treatment_kind = binary ? TreatmentKind::binary : TreatmentKind::continuous;
    out.validate();
    return out;
}

inline Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    return read_dataset_csv(in);
}

} // namespace dmllab

#endif
