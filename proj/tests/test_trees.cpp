#include <catch2/catch_amalgamated.hpp>

#include "dmllab/learners/fit.hpp"


using namespace dmllab;

namespace {

// brute-force single-split oracle: best (feature, midpoint threshold) by
// variance reduction with min_leaf, lowest feature then smallest
// threshold on ties
struct BestSplit {
    int feature = -1;
    double threshold = 0.0;
};

BestSplit brute_force_split(const Matrix& x, const std::vector<double>& y, std::size_t min_leaf) {
    BestSplit best;
    double best_score = -1e300;
    const std::size_t n = x.rows();
    double total = 0;
    for (double v : y) total += v;
    best_score = total * total / static_cast<double>(n);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        std::vector<double> vals = x.column(j);
        std::vector<double> uniq = vals;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (std::size_t u = 0; u + 1 < uniq.size(); ++u) {
            const double thr = 0.5 * (uniq[u] + uniq[u + 1]);
            double sum_l = 0;
            std::size_t cnt_l = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (vals[i] <= thr) {
                    sum_l += y[i];
                    ++cnt_l;
                }
            if (cnt_l < min_leaf || n - cnt_l < min_leaf) continue;
            const double sum_r = total - sum_l;
            const double score = sum_l * sum_l / cnt_l + sum_r * sum_r / (n - cnt_l);
            if (score > best_score) {
                best_score = score;
                best.feature = static_cast<int>(j);
                best.threshold = thr;
            }
        }
    }
    return best;
}

} // namespace

TEST_CASE("depth-1 tree finds the step in a step function") {
    RngStream rng(12);
    Matrix x(60, 3);
    std::vector<double> y(60);
    for (int i = 0; i < 60; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
        y[i] = x(i, 0) > 0 ? 2.0 : -1.0;
    }
    const auto oracle = brute_force_split(x, y, 2);
    REQUIRE(oracle.feature == 0);

    const auto model = fit_tree(x, y, 1, 2, Task::regression);
    const auto params = model_to_json(model)["parameters"]["nodes"];
    REQUIRE(params.size() == 3);
    CHECK(params[0]["feature"].get<int>() == oracle.feature);
    CHECK(params[0]["threshold"].get<double>() == Catch::Approx(oracle.threshold));
    // leaf values near the two step levels
    const double a = params[1]["value"].get<double>(), b = params[2]["value"].get<double>();
    CHECK(std::min(a, b) == Catch::Approx(-1.0).margin(1e-12));
    CHECK(std::max(a, b) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("tree split agrees with the brute-force oracle on random data") {
    RngStream rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 25 + rng.below(40);
        Matrix x(n, 4);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (int j = 0; j < 4; ++j) x(i, j) = std::round(rng.normal() * 4) / 4.0;
            y[i] = (x(i, 1) > 0.3 ? 1.5 : 0.0) + 0.5 * rng.normal();
        }
        const auto oracle = brute_force_split(x, y, 3);
        const auto nodes = model_to_json(fit_tree(x, y, 1, 3, Task::regression))["parameters"]["nodes"];
        if (oracle.feature < 0) {
            CHECK(nodes.size() == 1);
        } else {
            REQUIRE(nodes.size() == 3);
            CHECK(nodes[0]["feature"].get<int>() == oracle.feature);
            CHECK(nodes[0]["threshold"].get<double>() == Catch::Approx(oracle.threshold));
        }
    }
}

TEST_CASE("constant target gives a single leaf") {
    Matrix x(12, 2);
    RngStream rng(5);
    for (int i = 0; i < 12; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
    }
    std::vector<double> y(12, 3.5);
    const auto nodes = model_to_json(fit_tree(x, y, 4, 1, Task::regression))["parameters"]["nodes"];
    REQUIRE(nodes.size() == 1);
    CHECK(nodes[0]["value"].get<double>() == 3.5);
}

TEST_CASE("depth-0 tree is the mean predictor") {
    Matrix x(5, 1);
    std::vector<double> y{1, 2, 3, 4, 10};
    for (int i = 0; i < 5; ++i) x(i, 0) = i;
    const auto pred = fit_tree(x, y, 0, 1, Task::regression).predict(x);
    for (double v : pred) CHECK(v == Catch::Approx(4.0));
}

TEST_CASE("every leaf respects min_leaf") {
    RngStream rng(31);
    Matrix x(40, 2);
    std::vector<double> y(40);
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        y[i] = x(i, 0) + rng.normal();
    }
    const std::size_t min_leaf = 7;
    const auto model = fit_tree(x, y, 6, min_leaf, Task::regression);
    // count rows reaching each leaf
    const auto nodes = model_to_json(model)["parameters"]["nodes"];
    std::map<int, int> leaf_counts;
    for (int i = 0; i < 40; ++i) {
        int cur = 0;
        while (nodes[cur]["feature"].get<int>() >= 0) {
            const int f = nodes[cur]["feature"].get<int>();
            cur = x(i, f) <= nodes[cur]["threshold"].get<double>()
                      ? nodes[cur]["left"].get<int>()
                      : nodes[cur]["right"].get<int>();
        }
        ++leaf_counts[cur];
    }
    for (const auto& [leaf, count] : leaf_counts) CHECK(count >= static_cast<int>(min_leaf));
}

TEST_CASE("probability tree predicts leaf frequencies in [0,1]") {
    RngStream rng(41);
    Matrix x(50, 2);
    std::vector<double> y(50);
    for (int i = 0; i < 50; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        y[i] = rng.bernoulli(sigmoid(2 * x(i, 0))) ? 1.0 : 0.0;
    }
    for (double p : fit_tree(x, y, 3, 5, Task::probability).predict(x)) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("single-tree forest without bootstrap equals fit_tree") {
    RngStream rng(55);
    Matrix x(45, 3);
    std::vector<double> y(45);
    for (int i = 0; i < 45; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
        y[i] = x(i, 0) * x(i, 1) + rng.normal();
    }
    const auto tree_pred = fit_tree(x, y, 4, 5, Task::regression).predict(x);
    const auto forest_pred =
        fit_random_forest(x, y, 4, 1, 3, RngStream(1), Task::regression, 5, false).predict(x);
    for (int i = 0; i < 45; ++i) CHECK(forest_pred[i] == Catch::Approx(tree_pred[i]).margin(1e-12));
}

TEST_CASE("forest on a constant target predicts the constant") {
    RngStream rng(66);
    Matrix x(30, 2);
    for (int i = 0; i < 30; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
    }
    std::vector<double> y(30, -2.5);
    for (double v :
         fit_random_forest(x, y, 4, 20, 0, RngStream(3), Task::regression).predict(x))
        CHECK(v == Catch::Approx(-2.5).margin(1e-12));
}

TEST_CASE("100 trees beat 1 tree on training MSE for a nonlinear target") {
    RngStream rng(88);
    Matrix x(120, 3);
    std::vector<double> y(120);
    for (int i = 0; i < 120; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
        y[i] = std::sin(2 * x(i, 0)) + x(i, 1) * x(i, 1) + 0.3 * rng.normal();
    }
    auto mse_of = [&](std::size_t n_trees) {
        const auto pred =
            fit_random_forest(x, y, 5, n_trees, 0, RngStream(7, 1), Task::regression).predict(x);
        double s = 0;
        for (int i = 0; i < 120; ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
        return s / 120;
    };
    CHECK(mse_of(100) <= mse_of(1));
}

TEST_CASE("forest fit is deterministic given the stream") {
    RngStream rng(91);
    Matrix x(40, 2);
    std::vector<double> y(40);
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        y[i] = x(i, 0) + 0.5 * rng.normal();
    }
    const auto p1 = fit_random_forest(x, y, 4, 10, 1, RngStream(5, 2), Task::regression).predict(x);
    const auto p2 = fit_random_forest(x, y, 4, 10, 1, RngStream(5, 2), Task::regression).predict(x);
    CHECK(p1 == p2);
}
