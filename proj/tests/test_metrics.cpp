#include <catch2/catch_amalgamated.hpp>

#include "dmllab/metrics.hpp"
#include "dmllab/selection.hpp"

using namespace dmllab;

namespace {

RepetitionResult make_result(std::size_t rep, double theta_hat, double theta0,
                             double oracle_theta, double ci_half = 1.0) {
    RepetitionResult r;
    r.rep_id = rep;
    r.dgp = "toy";
    r.model_kind = ModelKind::plr;
    r.learner = "lasso";
    r.scheme = "full_sample";
    r.theta0 = theta0;
    r.estimate.theta_hat = theta_hat;
    r.estimate.ci_low = theta_hat - ci_half;
    r.estimate.ci_high = theta_hat + ci_half;
    r.estimate.std_error = ci_half / 1.96;
    r.oracle.theta_hat = oracle_theta;
    r.quality.combined_loss = 0.5;
    r.quality.predictive_loss_y = 1.0;
    return r;
}

} // namespace

TEST_CASE("aggregate hand example: two repetitions") {
    // theta_hat = (1, 3), theta0 = 1 -> bias 1, std sqrt(2)
    std::vector<RepetitionResult> rs{make_result(0, 1.0, 1.0, 1.5),
                                     make_result(1, 3.0, 1.0, 0.5)};
    const auto m = aggregate(rs);
    CHECK(m.mean_bias == Catch::Approx(1.0).margin(1e-12));
    CHECK(m.std_dev == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
    // mse = (0 + 4)/2 = 2; mse_oracle = (0.25 + 0.25)/2 = 0.25 -> rrmse sqrt(8)
    CHECK(m.rrmse == Catch::Approx(std::sqrt(8.0)).margin(1e-12));
    CHECK(m.rrmse_minus_1 == Catch::Approx(std::sqrt(8.0) - 1.0).margin(1e-12));
    CHECK(m.reps == 2);
}

TEST_CASE("perfect estimator yields zero rrmse and bias") {
    std::vector<RepetitionResult> rs;
    for (int r = 0; r < 5; ++r) rs.push_back(make_result(r, 2.0, 2.0, 2.0 + 0.1 * (r + 1)));
    const auto m = aggregate(rs);
    CHECK(m.rrmse == 0.0);
    CHECK(m.mean_bias == 0.0);
    CHECK(m.coverage == 1.0);
}

TEST_CASE("mse ratio definition") {
    // MSE(theta)=4, MSE(oracle)=1 -> rrmse 2
    std::vector<RepetitionResult> rs{make_result(0, 2.0, 0.0, 1.0),
                                     make_result(1, -2.0, 0.0, -1.0)};
    CHECK(aggregate(rs).rrmse == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("aggregate matches an independent one-pass recomputation") {
    RngStream rng(50);
    std::vector<RepetitionResult> rs;
    const double theta0 = 0.7;
    for (int r = 0; r < 40; ++r)
        rs.push_back(make_result(r, theta0 + rng.normal() * 0.3, theta0,
                                 theta0 + rng.normal() * 0.1, 0.4));
    const auto m = aggregate(rs);

    double mse = 0, mseo = 0, bias = 0, cover = 0, tbar = 0;
    for (const auto& r : rs) {
        mse += std::pow(r.estimate.theta_hat - theta0, 2);
        mseo += std::pow(r.oracle.theta_hat - theta0, 2);
        bias += r.estimate.theta_hat - theta0;
        cover += (theta0 >= r.estimate.ci_low && theta0 <= r.estimate.ci_high) ? 1 : 0;
        tbar += r.estimate.theta_hat;
    }
    const double n = rs.size();
    tbar /= n;
    double ss = 0;
    for (const auto& r : rs) ss += std::pow(r.estimate.theta_hat - tbar, 2);
    CHECK(m.rrmse == Catch::Approx(std::sqrt((mse / n) / (mseo / n))).margin(1e-12));
    CHECK(m.mean_bias == Catch::Approx(bias / n).margin(1e-12));
    CHECK(m.std_dev == Catch::Approx(std::sqrt(ss / (n - 1))).margin(1e-12));
    CHECK(m.coverage == Catch::Approx(cover / n).margin(1e-15));
}

TEST_CASE("aggregate rejects mixed groups and zero oracle mse") {
    std::vector<RepetitionResult> rs{make_result(0, 1, 1, 2), make_result(1, 1, 1, 2)};
    rs[1].learner = "forest";
    CHECK_THROWS_AS(aggregate(rs), std::invalid_argument);

    std::vector<RepetitionResult> zero{make_result(0, 1.5, 1, 1.0), make_result(1, 0.5, 1, 1.0)};
    CHECK_THROWS_AS(aggregate(zero), UndefinedMetricError);
}

TEST_CASE("coverage equals the exact CI-containment share") {
    std::vector<RepetitionResult> rs;
    for (int r = 0; r < 10; ++r) rs.push_back(make_result(r, r < 3 ? 10.0 : 0.0, 0.0, 1.0, 0.5));
    CHECK(aggregate(rs).coverage == Catch::Approx(0.7).margin(1e-15));
}

namespace {

std::vector<RepetitionResult> candidates_with_losses(std::vector<double> combined,
                                                     std::vector<double> ylosses) {
    static const char* labels[] = {"lasso", "forest", "boosting", "stacking", "linear"};
    std::vector<RepetitionResult> out;
    for (std::size_t i = 0; i < combined.size(); ++i) {
        RepetitionResult r;
        r.rep_id = 3;
        r.model_kind = ModelKind::plr;
        r.learner = labels[i];
        r.quality.combined_loss = combined[i];
        r.quality.predictive_loss_y = ylosses[i];
        out.push_back(r);
    }
    return out;
}

} // namespace

TEST_CASE("combined-loss selection takes the argmin with canonical ties") {
    CHECK(select_learner_combined_loss(candidates_with_losses({0.75, 0.8}, {1, 1})) == "lasso");
    CHECK(select_learner_combined_loss(candidates_with_losses({0.8, 0.75}, {1, 1})) == "forest");
    CHECK(select_learner_combined_loss(candidates_with_losses({0.5, 0.5}, {1, 1})) == "lasso");
}

TEST_CASE("scale invariance of the selection criterion") {
    RngStream rng(51);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> losses{rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2)};
        const auto base = candidates_with_losses(losses, losses);
        const std::string pick = select_learner_combined_loss(base);
        const double scale = rng.uniform(0.5, 10.0);
        std::vector<double> scaled = losses;
        for (double& v : scaled) v *= scale;
        CHECK(select_learner_combined_loss(candidates_with_losses(scaled, scaled)) == pick);
        // any strictly increasing transform preserves the argmin
        std::vector<double> transformed = losses;
        for (double& v : transformed) v = std::exp(2.0 * v) + 1.0;
        CHECK(select_learner_combined_loss(candidates_with_losses(transformed, transformed)) ==
              pick);
    }
}

TEST_CASE("y-loss selection") {
    CHECK(select_learner_y_loss(candidates_with_losses({1, 1}, {1.0, 0.4})) == "forest");
    const auto single = candidates_with_losses({1}, {2});
    CHECK(select_learner_y_loss(single) == "lasso");
    // permuting candidates with distinct losses never changes the pick
    auto cands = candidates_with_losses({1, 1, 1}, {0.9, 0.2, 0.5});
    const auto pick = select_learner_y_loss(cands);
    std::swap(cands[0], cands[2]);
    CHECK(select_learner_y_loss(cands) == pick);
}

TEST_CASE("causal-model selection prefers irm on ties") {
    NuisanceQuality plr_q, irm_q;
    plr_q.predictive_loss_y = 1.2;
    irm_q.predictive_loss_y = 1.0;
    CHECK(select_causal_model(plr_q, irm_q) == ModelKind::irm);
    plr_q.predictive_loss_y = 1.0;
    CHECK(select_causal_model(plr_q, irm_q) == ModelKind::irm);
    plr_q.predictive_loss_y = 0.8;
    CHECK(select_causal_model(plr_q, irm_q) == ModelKind::plr);
}

TEST_CASE("per-dgp selection uses the median criterion across repetitions") {
    std::vector<RepetitionResult> results;
    // lasso losses {1, 1, 10} (median 1), forest losses {2, 2, 2} (median 2)
    const double lasso_losses[] = {1, 1, 10};
    for (int r = 0; r < 3; ++r) {
        RepetitionResult a;
        a.rep_id = r;
        a.dgp = "toy";
        a.learner = "lasso";
        a.quality.combined_loss = lasso_losses[r];
        results.push_back(a);
        RepetitionResult b = a;
        b.learner = "forest";
        b.quality.combined_loss = 2.0;
        results.push_back(b);
    }
    CHECK(select_learner(results, SelectionScope::per_dgp) == "lasso");
    // the mean would have picked forest (lasso mean 4 > 2); median does not
    double lasso_mean = (1 + 1 + 10) / 3.0;
    CHECK(lasso_mean > 2.0);

    // per-repetition scope picks within one repetition
    std::vector<RepetitionResult> one_rep{results[0], results[1]};
    CHECK(select_learner(one_rep, SelectionScope::per_repetition) == "lasso");
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == Catch::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == Catch::Approx(-1.0));
    // monotone transform leaves rank correlation at one
    CHECK(spearman({1, 2, 3, 4}, {1, 8, 27, 64}) == Catch::Approx(1.0));
}
