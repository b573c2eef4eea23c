#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "dmllab/dataset.hpp"
#include "dmllab/folds.hpp"
#include "dmllab/matrix.hpp"
#include "dmllab/rng.hpp"

using namespace dmllab;

TEST_CASE("rng streams are reproducible and stream-distinct") {
    RngStream a(42, 1), b(42, 1), c(42, 2);
    std::vector<double> da, db, dc;
    for (int i = 0; i < 32; ++i) {
        da.push_back(a.normal());
        db.push_back(b.normal());
        dc.push_back(c.normal());
    }
    CHECK(da == db);
    CHECK(da != dc);
    CHECK(RngStream(1, 0).derive(7).uniform01() == RngStream(1, 0).derive(7).uniform01());
}

TEST_CASE("student t draws have roughly the right spread") {
    RngStream rng(5);
    double m = 0, m2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double t = rng.student_t(8);
        m += t;
        m2 += t * t;
    }
    m /= n;
    const double var = m2 / n - m * m;
    CHECK(std::fabs(m) < 0.05);
    CHECK(var == Catch::Approx(8.0 / 6.0).margin(0.1));
}

TEST_CASE("normal quantile matches known points") {
    CHECK(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-15));
    CHECK(normal_quantile(0.975) == Catch::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.025) == Catch::Approx(-1.959963984540054).epsilon(1e-12));
}

TEST_CASE("make_kfold sizes") {
    const auto p1 = make_kfold(4, 2, RngStream(1));
    REQUIRE(p1.k() == 2);
    CHECK(p1.folds[0].size() == 2);
    CHECK(p1.folds[1].size() == 2);

    const auto p2 = make_kfold(10, 5, RngStream(2));
    for (const auto& f : p2.folds) CHECK(f.size() == 2);

    const auto p3 = make_kfold(7, 3, RngStream(3));
    std::multiset<std::size_t> sizes;
    for (const auto& f : p3.folds) sizes.insert(f.size());
    CHECK(sizes == std::multiset<std::size_t>{2, 2, 3});

    CHECK_THROWS_AS(make_kfold(5, 1, RngStream(1)), std::invalid_argument);
    CHECK_THROWS_AS(make_kfold(5, 6, RngStream(1)), std::invalid_argument);
}

TEST_CASE("partition property over random triples") {
    RngStream meta(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + meta.below(200);
        const std::size_t k = 2 + meta.below(std::max<std::size_t>(n - 1, 1));
        if (k > n) continue;
        const auto part = make_kfold(n, k, RngStream(meta.next_u64()));
        std::set<std::size_t> seen;
        std::size_t min_size = n, max_size = 0;
        for (const auto& fold : part.folds) {
            min_size = std::min(min_size, fold.size());
            max_size = std::max(max_size, fold.size());
            for (std::size_t i : fold) {
                CHECK(i < n);
                CHECK(seen.insert(i).second); // disjoint
            }
        }
        REQUIRE(seen.size() == n); // union complete
        CHECK(max_size - min_size <= 1);
    }
}

TEST_CASE("make_kfold is deterministic in its stream") {
    const auto a = make_kfold(37, 4, RngStream(7, 3));
    const auto b = make_kfold(37, 4, RngStream(7, 3));
    CHECK(a.folds == b.folds);
}

TEST_CASE("stratified folds balance classes") {
    std::vector<double> d(10, 0.0);
    for (int i = 0; i < 5; ++i) d[i] = 1.0;
    const auto part = make_stratified_kfold(d, 5, RngStream(11));
    for (const auto& fold : part.folds) {
        REQUIRE(fold.size() == 2);
        int ones = 0;
        for (std::size_t i : fold) ones += d[i] == 1.0;
        CHECK(ones == 1);
    }

    std::vector<double> all_ones(8, 1.0);
    CHECK_THROWS_AS(make_stratified_kfold(all_ones, 2, RngStream(1)), StratificationError);

    std::vector<double> d64(10, 0.0);
    for (int i = 0; i < 6; ++i) d64[i] = 1.0;
    const auto p2 = make_stratified_kfold(d64, 2, RngStream(3));
    for (const auto& fold : p2.folds) {
        int ones = 0;
        for (std::size_t i : fold) ones += d64[i] == 1.0;
        CHECK(ones == 3);
    }
}

TEST_CASE("stratified folds never lose a class") {
    RngStream meta(123);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 20 + meta.below(100);
        const std::size_t k = 2 + meta.below(4);
        std::vector<double> d(n, 0.0);
        std::size_t ones = k + meta.below(n - 2 * k);
        for (std::size_t i = 0; i < ones; ++i) d[i] = 1.0;
        const auto part = make_stratified_kfold(d, k, RngStream(meta.next_u64()));
        for (const auto& fold : part.folds) {
            int fold_ones = 0;
            for (std::size_t i : fold) fold_ones += d[i] == 1.0;
            CHECK(fold_ones >= 1);
        }
    }
}

TEST_CASE("split_half sizes and determinism") {
    auto [t1, e1] = split_half(10, RngStream(5));
    CHECK(t1.size() == 5);
    CHECK(e1.size() == 5);
    auto [t2, e2] = split_half(11, RngStream(5));
    CHECK(t2.size() == 6);
    CHECK(e2.size() == 5);
    std::set<std::size_t> all(t2.begin(), t2.end());
    all.insert(e2.begin(), e2.end());
    CHECK(all.size() == 11);

    auto [t3, e3] = split_half(11, RngStream(5));
    CHECK(t2 == t3);
    CHECK(e2 == e3);
    CHECK_THROWS_AS(split_half(3, RngStream(1)), std::invalid_argument);
}

TEST_CASE("subset selects rows in index order") {
    Dataset data;
    data.y = {1, 2, 3};
    data.d = {0, 1, 0.5};
    data.x = Matrix{{10}, {20}, {30}};
    data.treatment_kind = TreatmentKind::continuous;

    std::vector<std::size_t> all{0, 1, 2};
    const Dataset same = subset(data, all);
    CHECK(same.y == data.y);
    CHECK(same.x.column(0) == data.x.column(0));

    const Dataset one = subset(data, {0});
    CHECK(one.n() == 1);
    CHECK(one.y[0] == 1);

    const Dataset swapped = subset(data, {2, 0});
    CHECK(swapped.y == std::vector<double>{3, 1});
    CHECK(swapped.x(0, 0) == 30);
    CHECK(swapped.x(1, 0) == 10);

    CHECK_THROWS_AS(subset(data, {3}), std::invalid_argument);
    CHECK_THROWS_AS(subset(data, {}), std::invalid_argument);
}

TEST_CASE("dataset validation") {
    Dataset d;
    d.y = {1, 2};
    d.d = {0, 1};
    d.x = Matrix{{1}, {2}};
    d.treatment_kind = TreatmentKind::binary;
    CHECK_NOTHROW(d.validate());

    Dataset one_class = d;
    one_class.d = {1, 1};
    CHECK_THROWS_AS(one_class.validate(), std::invalid_argument);

    Dataset nonbinary = d;
    nonbinary.d = {0, 0.5};
    CHECK_THROWS_AS(nonbinary.validate(), std::invalid_argument);

    Dataset nan_y = d;
    nan_y.y[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(nan_y.validate(), std::invalid_argument);
}

TEST_CASE("csv ingestion round trip and diagnostics") {
    std::istringstream in("y,d,x1,x2\n1.5,1,0.25,-3\n2.5,0,1e-2,4\n");
    const Dataset d = read_dataset_csv(in);
    CHECK(d.n() == 2);
    CHECK(d.p() == 2);
    CHECK(d.treatment_kind == TreatmentKind::binary);
    CHECK(d.y[1] == 2.5);
    CHECK(d.x(1, 0) == Catch::Approx(0.01));

    std::istringstream bad("y,d,x1\n1,0,oops\n2,1,3\n");
    try {
        read_dataset_csv(bad);
        FAIL("expected parse failure");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 1") != std::string::npos);
        CHECK(msg.find("x1") != std::string::npos);
    }

    std::istringstream badcol("y,d,foo\n1,0,2\n");
    CHECK_THROWS_AS(read_dataset_csv(badcol), std::invalid_argument);
}
