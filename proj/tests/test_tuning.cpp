#include <catch2/catch_amalgamated.hpp>

#include "dmllab/tuning.hpp"

using namespace dmllab;

namespace {

Dataset make_regression_data(std::size_t n, std::size_t p, RngStream rng, bool binary_d = false) {
    Dataset d;
    d.x = Matrix(n, p);
    d.y.resize(n);
    d.d.resize(n);
    d.treatment_kind = binary_d ? TreatmentKind::binary : TreatmentKind::continuous;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) d.x(i, j) = rng.normal();
        const double index = d.x(i, 0) - 0.5 * d.x(i, 1);
        d.d[i] = binary_d ? (rng.bernoulli(sigmoid(index)) ? 1.0 : 0.0) : index + rng.normal();
        d.y[i] = 0.5 * d.d[i] + d.x(i, 0) + rng.normal();
    }
    return d;
}

SearchSpace tree_space(std::vector<double> depths) {
    SearchSpace s;
    s.family = LearnerFamily::tree;
    for (double depth : depths) s.grid.push_back({{"max_depth", depth}, {"min_leaf", 5}});
    return s;
}

} // namespace

TEST_CASE("grid search with a singleton grid returns that config") {
    const Dataset data = make_regression_data(60, 3, RngStream(1));
    const auto res =
        grid_search_cv(tree_space({3}), data.x, data.y, Task::regression, 5, RngStream(2));
    CHECK(res.best.require("max_depth") == 3);
    CHECK(res.table.size() == 1);
    CHECK(std::isfinite(res.cv_loss));
}

TEST_CASE("grid search CV losses match a brute-force recomputation") {
    const Dataset data = make_regression_data(50, 3, RngStream(3));
    const SearchSpace space = tree_space({2, 3, 4});
    const RngStream rng(17, 4);
    const auto res = grid_search_cv(space, data.x, data.y, Task::regression, 5, rng);

    // independent loop with the identical partition and fits
    const FoldPartition part = make_kfold(50, 5, rng.derive(hash_tag("gridcv")));
    for (std::size_t g = 0; g < space.grid.size(); ++g) {
        double loss = 0.0;
        for (std::size_t k = 0; k < part.k(); ++k) {
            const auto train_idx = part.complement(k);
            const Matrix xt = data.x.take_rows(train_idx);
            std::vector<double> yt;
            for (std::size_t i : train_idx) yt.push_back(data.y[i]);
            LearnerConfig cfg;
            cfg.family = space.family;
            cfg.task = Task::regression;
            cfg.hyperparams = space.grid[g];
            const auto model = fit_model(cfg, xt, yt, rng.derive(hash_tag("grid"), g, k));
            const auto pred = model.predict(data.x.take_rows(part.folds[k]));
            double fold_loss = 0.0;
            for (std::size_t i = 0; i < part.folds[k].size(); ++i) {
                const double e = pred[i] - data.y[part.folds[k][i]];
                fold_loss += e * e;
            }
            loss += fold_loss / part.folds[k].size();
        }
        loss /= part.k();
        CHECK(res.table[g].second == Catch::Approx(loss).margin(1e-12));
    }
}

TEST_CASE("grid search prefers depth 6 on a six-way interaction target") {
    int deep_wins = 0;
    for (int seed = 0; seed < 20; ++seed) {
        RngStream rng(5000 + seed);
        Matrix x(400, 6);
        std::vector<double> y(400);
        for (int i = 0; i < 400; ++i) {
            bool all_positive = true;
            for (int j = 0; j < 6; ++j) {
                x(i, j) = rng.normal(0.5, 1.0);
                all_positive = all_positive && x(i, j) > 0;
            }
            y[i] = (all_positive ? 3.0 : 0.0) + 0.1 * rng.normal();
        }
        const auto res =
            grid_search_cv(tree_space({4, 6}), x, y, Task::regression, 5, rng.derive(1));
        if (res.table[1].second < res.table[0].second) ++deep_wins;
    }
    CHECK(deep_wins >= 16);
}

TEST_CASE("grid search scores failing points as +inf without aborting") {
    const Dataset data = make_regression_data(40, 2, RngStream(6));
    SearchSpace space;
    space.family = LearnerFamily::lasso;
    space.grid = {{{"lambda", -1.0}}, {{"lambda", 0.1}}}; // first point invalid
    const auto res = grid_search_cv(space, data.x, data.y, Task::regression, 5, RngStream(7));
    CHECK(res.failed_points == 1);
    CHECK(std::isinf(res.table[0].second));
    CHECK(res.best.require("lambda") == 0.1);
}

TEST_CASE("full-sample outcome replicates one config across folds") {
    const Dataset data = make_regression_data(80, 4, RngStream(8));
    const NuisanceSpecs specs{LearnerSpec::named("lasso")};
    const auto outcome = tune_full_sample(specs, data, ModelKind::plr, 5, RngStream(9, 1));
    CHECK(outcome.scheme == TuningScheme::full_sample);
    REQUIRE(outcome.k() == 5);
    for (std::size_t k = 1; k < 5; ++k) {
        CHECK(outcome.config_for(k).outcome == outcome.config_for(0).outcome);
        CHECK(outcome.config_for(k).treatment == outcome.config_for(0).treatment);
    }
    CHECK(outcome.estimation_indices.empty());
}

TEST_CASE("untuned specs make tuning deterministic regardless of seed") {
    const Dataset data = make_regression_data(60, 3, RngStream(10));
    LearnerSpec fixed;
    fixed.label = "boosting_default";
    fixed.family = LearnerFamily::gradient_boosting;
    fixed.tune = false;
    fixed.fixed = {{"max_depth", 6.0}, {"rounds", 100.0}};
    const NuisanceSpecs specs{fixed};
    const auto a = tune_full_sample(specs, data, ModelKind::plr, 5, RngStream(1, 1));
    const auto b = tune_full_sample(specs, data, ModelKind::plr, 5, RngStream(2, 2));
    CHECK(a.config_for(0).outcome == b.config_for(0).outcome);
    CHECK(a.config_for(0).outcome.get("rounds", -1) == 100.0);
}

TEST_CASE("split-sample outcome reserves a disjoint estimation half") {
    const Dataset data = make_regression_data(100, 4, RngStream(11));
    const NuisanceSpecs specs{LearnerSpec::named("lasso")};
    const RngStream rng(12, 5);
    const auto outcome = tune_split_sample(specs, data, ModelKind::plr, 5, rng);
    CHECK(outcome.estimation_indices.size() == 50);

    auto [tune_idx, est_idx] = split_half(100, rng.derive(hash_tag("half")));
    CHECK(outcome.estimation_indices == est_idx);
    for (std::size_t i : outcome.estimation_indices)
        CHECK(std::find(tune_idx.begin(), tune_idx.end(), i) == tune_idx.end());

    const auto again = tune_split_sample(specs, data, ModelKind::plr, 5, rng);
    CHECK(again.estimation_indices == outcome.estimation_indices);
    CHECK(again.config_for(0).outcome == outcome.config_for(0).outcome);

    Dataset tiny = make_regression_data(6, 2, RngStream(13));
    CHECK_THROWS_AS(tune_split_sample(specs, tiny, ModelKind::plr, 2, RngStream(1)),
                    SchemeInfeasibleError);
}

TEST_CASE("split-sample config equals a manual grid search on the tuning half") {
    const Dataset data = make_regression_data(90, 3, RngStream(14), true);
    const NuisanceSpecs specs{LearnerSpec::named("forest")};
    const RngStream rng(15, 6);
    const auto outcome = tune_split_sample(specs, data, ModelKind::plr, 5, rng);

    auto [tune_idx, est_idx] = split_half(90, rng.derive(hash_tag("half")));
    const Dataset tune_data = subset(data, tune_idx);
    SearchSpace space;
    space.family = LearnerFamily::random_forest;
    for (double depth : {4.0, 5.0, 6.0})
        space.grid.push_back({{"max_depth", depth}, {"n_trees", 100.0}});
    const auto manual = grid_search_cv(
        space, tune_data.x, tune_data.y, Task::regression, 5,
        rng.derive(hash_tag("tune")).derive(hash_tag("outcome")));
    CHECK(outcome.config_for(0).outcome.require("max_depth") == manual.best.require("max_depth"));
}

TEST_CASE("on-folds configs come from each fold's complement") {
    const Dataset data = make_regression_data(80, 3, RngStream(16));
    const NuisanceSpecs specs{LearnerSpec::named("forest")};
    const FoldPartition part = make_kfold(80, 4, RngStream(17));
    const RngStream rng(18, 7);
    const auto outcome = tune_on_folds(specs, data, ModelKind::plr, part, rng);
    REQUIRE(outcome.k() == 4);

    for (std::size_t k = 0; k < 2; ++k) {
        const Dataset train = subset(data, part.complement(k));
        SearchSpace space;
        space.family = LearnerFamily::random_forest;
        for (double depth : {4.0, 5.0, 6.0})
            space.grid.push_back({{"max_depth", depth}, {"n_trees", 100.0}});
        const auto manual =
            grid_search_cv(space, train.x, train.y, Task::regression, 5,
                           rng.derive(k).derive(hash_tag("outcome")));
        CHECK(outcome.config_for(k).outcome.require("max_depth") ==
              manual.best.require("max_depth"));
    }
}

TEST_CASE("on-folds costs K times the full-sample fits") {
    const Dataset data = make_regression_data(60, 3, RngStream(19));
    const NuisanceSpecs specs{LearnerSpec::named("forest")};
    const std::size_t k = 3;

    fit_counter().store(0);
    tune_full_sample(specs, data, ModelKind::plr, k, RngStream(20, 1));
    const std::uint64_t full_fits = fit_counter().load();

    const FoldPartition part = make_kfold(60, k, RngStream(21));
    fit_counter().store(0);
    tune_on_folds(specs, data, ModelKind::plr, part, RngStream(22, 1));
    CHECK(fit_counter().load() == k * full_fits);
}

TEST_CASE("boosting tuning freezes the CV-chosen round count") {
    const Dataset data = make_regression_data(90, 3, RngStream(23));
    const NuisanceSpecs specs{LearnerSpec::named("boosting")};
    const auto outcome = tune_full_sample(specs, data, ModelKind::plr, 5, RngStream(24, 2));
    const auto& cfg = outcome.config_for(0).outcome;
    CHECK(cfg.family == LearnerFamily::gradient_boosting);
    const double rounds = cfg.get("rounds", -1);
    CHECK(rounds >= 0);
    CHECK(rounds <= 100);
}

TEST_CASE("irm tuning poses g as a regression on (d, x)") {
    const Dataset data = make_regression_data(80, 3, RngStream(25), true);
    const NuisanceSpecs specs{LearnerSpec::named("lasso")};
    const auto outcome = tune_full_sample(specs, data, ModelKind::irm, 5, RngStream(26, 1));
    CHECK(outcome.config_for(0).outcome.family == LearnerFamily::lasso);
    CHECK(outcome.config_for(0).treatment.task == Task::probability);
}
