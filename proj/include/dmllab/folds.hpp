#ifndef DMLLAB_FOLDS_HPP
#define DMLLAB_FOLDS_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dmllab/errors.hpp"
#include "dmllab/rng.hpp"

namespace dmllab {

/// K disjoint index sets covering {0,...,n-1}, sizes differing by at
/// most one. Row order inside folds is the shuffled order; nothing
/// downstream may rely on sortedness.
struct FoldPartition {
    std::vector<std::vector<std::size_t>> folds;
    std::size_t n = 0;
    std::uint64_t seed = 0;

    std::size_t k() const { return folds.size(); }

    std::vector<std::size_t> complement(std::size_t fold) const {
        std::vector<std::size_t> out;
        out.reserve(n - folds[fold].size());
        for (std::size_t j = 0; j < folds.size(); ++j) {
            if (j == fold) continue;
            out.insert(out.end(), folds[j].begin(), folds[j].end());
        }
        return out;
    }

    /// fold index of each observation.
    std::vector<std::size_t> fold_of() const {
        std::vector<std::size_t> out(n, 0);
        for (std::size_t k_ = 0; k_ < folds.size(); ++k_)
            for (std::size_t i : folds[k_]) out[i] = k_;
        return out;
    }
};

inline FoldPartition make_kfold(std::size_t n, std::size_t k, RngStream rng) {
    if (k < 2 || k > n) throw std::invalid_argument("make_kfold: need 2 <= k <= n");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    FoldPartition part;
    part.n = n;
    part.seed = rng.seed();
    part.folds.resize(k);
    const std::size_t base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        part.folds[f].assign(order.begin() + pos, order.begin() + pos + size);
        pos += size;
    }
    return part;
}

/// Class-balanced folds for binary treatments: each class is shuffled
/// and dealt into k chunks, so per-fold treated counts differ from an
/// even split by at most one observation per class.
inline FoldPartition make_stratified_kfold(const std::vector<double>& d, std::size_t k,
                                           RngStream rng) {
    if (k < 2) throw std::invalid_argument("make_stratified_kfold: need k >= 2");
    std::vector<std::size_t> ones, zeros;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] == 1.0) ones.push_back(i);
        else if (d[i] == 0.0) zeros.push_back(i);
        else throw std::invalid_argument("make_stratified_kfold: d must be 0/1");
    }
    if (ones.size() < k || zeros.size() < k)
        throw StratificationError("make_stratified_kfold: a class has fewer than k members");
    rng.shuffle(ones);
    rng.shuffle(zeros);

    FoldPartition part;
    part.n = d.size();
    part.seed = rng.seed();
    part.folds.resize(k);
    auto deal = [&](const std::vector<std::size_t>& cls) {
        const std::size_t base = cls.size() / k, extra = cls.size() % k;
        std::size_t pos = 0;
        for (std::size_t f = 0; f < k; ++f) {
            const std::size_t size = base + (f < extra ? 1 : 0);
            part.folds[f].insert(part.folds[f].end(), cls.begin() + pos, cls.begin() + pos + size);
            pos += size;
        }
    };
    deal(ones);
    deal(zeros);
    for (auto& fold : part.folds) rng.shuffle(fold);
    return part;
}

/// Disjoint halves of {0,...,n-1}: first has ceil(n/2) rows (tuning),
/// second floor(n/2) (estimation).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_half(std::size_t n,
                                                                                RngStream rng) {
    if (n < 4) throw std::invalid_argument("split_half: need n >= 4");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::size_t cut = (n + 1) / 2;
    return {std::vector<std::size_t>(order.begin(), order.begin() + cut),
            std::vector<std::size_t>(order.begin() + cut, order.end())};
}

} // namespace dmllab

#endif
