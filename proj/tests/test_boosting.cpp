#include <catch2/catch_amalgamated.hpp>

#include "dmllab/learners/fit.hpp"

using namespace dmllab;

namespace {

std::pair<Matrix, std::vector<double>> linear_plus_noise(std::size_t n, RngStream& rng,
                                                         double noise_sd) {
    Matrix x(n, 3);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
        y[i] = 1.5 * x(i, 0) - x(i, 1) + noise_sd * rng.normal();
    }
    return {x, y};
}

} // namespace

TEST_CASE("training squared loss is non-increasing in rounds") {
    RngStream rng(101);
    auto [x, y] = linear_plus_noise(80, rng, 0.5);
    std::vector<int> rows(80);
    std::iota(rows.begin(), rows.end(), 0);
    detail::BoostPath path(x, rows, y, Task::regression, 0.1, 2, 5);
    double prev = path.training_loss();
    for (int r = 0; r < 40; ++r) {
        path.add_round();
        const double cur = path.training_loss();
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("early stopping triggers on a noisy linear signal") {
    int stopped_early = 0;
    for (int seed = 0; seed < 20; ++seed) {
        RngStream rng(3000 + seed);
        auto [x, y] = linear_plus_noise(100, rng, 1.5);
        const auto model =
            fit_gradient_boosting(x, y, 2, 0.1, 100, 5, rng.derive(1), Task::regression);
        const double rounds = model.config().get("rounds", -1);
        REQUIRE(rounds >= 0);
        if (rounds < 100) ++stopped_early;
    }
    CHECK(stopped_early >= 16); // >= 80% of seeds
}

TEST_CASE("zero max rounds degenerates to the mean predictor") {
    RngStream rng(7);
    auto [x, y] = linear_plus_noise(30, rng, 0.1);
    const auto pred =
        fit_gradient_boosting(x, y, 2, 0.1, 0, 5, rng.derive(2), Task::regression).predict(x);
    const double ybar = mean(y);
    for (double v : pred) CHECK(v == Catch::Approx(ybar).margin(1e-12));
}

TEST_CASE("fixed round count skips the internal CV") {
    RngStream rng(8);
    auto [x, y] = linear_plus_noise(60, rng, 0.5);
    const auto model = fit_gradient_boosting(x, y, 2, 0.1, 100, 5, rng.derive(3),
                                             Task::regression, 5, 17);
    CHECK(model.config().get("rounds", -1) == 17);
    CHECK(boosting_validation_curve(model).empty());
}

TEST_CASE("probability boosting keeps predictions in [0,1]") {
    RngStream rng(9);
    Matrix x(80, 2);
    std::vector<double> y(80);
    for (int i = 0; i < 80; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        y[i] = rng.bernoulli(sigmoid(1.5 * x(i, 0))) ? 1.0 : 0.0;
    }
    const auto model =
        fit_gradient_boosting(x, y, 2, 0.1, 40, 5, rng.derive(4), Task::probability);
    for (double p : model.predict(x)) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("boosting fits are deterministic given the stream") {
    RngStream rng(10);
    auto [x, y] = linear_plus_noise(70, rng, 1.0);
    const auto p1 =
        fit_gradient_boosting(x, y, 2, 0.1, 60, 5, RngStream(4, 4), Task::regression).predict(x);
    const auto p2 =
        fit_gradient_boosting(x, y, 2, 0.1, 60, 5, RngStream(4, 4), Task::regression).predict(x);
    CHECK(p1 == p2);
}
