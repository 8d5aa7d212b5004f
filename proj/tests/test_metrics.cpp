#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "ftlab/metrics.hpp"

using namespace ftlab;

TEST_CASE("confusion accumulation") {
    const std::vector<int> truth = {0, 1, 2, 1, 0};
    const ConfusionMatrix perfect = confusion(truth, truth, 3);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) CHECK(perfect.at(i, j) == (i == j ? perfect.row_sum(i) : 0));
    }

    const ConfusionMatrix single = confusion(std::vector<int>{0}, std::vector<int>{1}, 2);
    CHECK(single.at(0, 1) == 1);
    CHECK(single.total() == 1);
    CHECK(single.trace() == 0);

    // row sums equal per-class true counts
    const std::vector<int> preds = {1, 1, 0, 2, 0};
    const ConfusionMatrix cm = confusion(truth, preds, 3);
    CHECK(cm.row_sum(0) == 2);
    CHECK(cm.row_sum(1) == 2);
    CHECK(cm.row_sum(2) == 1);
    CHECK(cm.total() == 5);

    CHECK_THROWS_AS(confusion(std::vector<int>{0, 1}, std::vector<int>{0}, 2), DataError);
    CHECK_THROWS_AS(confusion(std::vector<int>{0, 7}, std::vector<int>{0, 1}, 2), DataError);
}

TEST_CASE("binary report on the textbook counts") {
    {
        ConfusionMatrix cm(2);
        cm.at(1, 1) = 1;  // TP
        cm.at(0, 0) = 1;  // TN
        const MetricsReport r = binary_report(cm, 1);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f_score == 1.0);
        CHECK(r.accuracy == 1.0);
        CHECK_FALSE(r.degenerate);
    }
    {
        // no positive predictions while positives exist
        ConfusionMatrix cm(2);
        cm.at(1, 0) = 3;
        cm.at(0, 0) = 5;
        const MetricsReport r = binary_report(cm, 1);
        CHECK(r.precision == 0.0);
        CHECK(r.recall == 0.0);
        CHECK(r.f_score == 0.0);
        CHECK(r.degenerate);
    }
    {
        // TP=3 FP=1 FN=2 TN=4
        ConfusionMatrix cm(2);
        cm.at(1, 1) = 3;
        cm.at(0, 1) = 1;
        cm.at(1, 0) = 2;
        cm.at(0, 0) = 4;
        const MetricsReport r = binary_report(cm, 1);
        CHECK(r.precision == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(r.recall == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(r.f_score == doctest::Approx(2.0 * 0.75 * 0.6 / 1.35).epsilon(1e-12));
        CHECK(r.accuracy == doctest::Approx(0.7).epsilon(1e-12));
    }
}

TEST_CASE("macro report") {
    {
        const std::vector<int> t = {0, 1, 2, 0, 1, 2};
        const MetricsReport r = macro_report(confusion(t, t, 3));
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f_score == 1.0);
        CHECK(r.accuracy == 1.0);
    }
    {
        // macro F1 at C=2 equals the mean of the one-vs-rest F1s
        ConfusionMatrix cm(2);
        cm.at(0, 0) = 5;
        cm.at(0, 1) = 1;
        cm.at(1, 0) = 2;
        cm.at(1, 1) = 4;
        const MetricsReport r = macro_report(cm);
        CHECK(r.per_class[0].precision == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
        CHECK(r.per_class[0].recall == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
        CHECK(r.per_class[1].precision == doctest::Approx(4.0 / 5.0).epsilon(1e-12));
        CHECK(r.per_class[1].recall == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
        CHECK(r.f_score == doctest::Approx((0.76923076923076927 + 0.72727272727272729) / 2.0).epsilon(1e-9));
        CHECK(r.f_score == doctest::Approx(0.7483).epsilon(1e-4));
        CHECK(r.f_score == (r.per_class[0].f1 + r.per_class[1].f1) / 2.0);
    }
}

TEST_CASE("class absent from truth and prediction scores zero but still averages") {
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 4;
    cm.at(1, 1) = 4;  // class 2 never appears
    const MetricsReport r = macro_report(cm);
    CHECK(r.per_class[2].precision == 0.0);
    CHECK(r.per_class[2].recall == 0.0);
    CHECK(r.per_class[2].degenerate);
    CHECK(r.degenerate);
    CHECK(r.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.accuracy == 1.0);
}

TEST_CASE("permuting class ids permutes per-class metrics, macro values unchanged") {
    // permutation: new id = (old id + 1) mod 3
    const std::vector<int> truth = {0, 0, 1, 1, 2, 2, 0, 1};
    const std::vector<int> preds = {0, 1, 1, 1, 2, 0, 2, 0};
    std::vector<int> truth_p, preds_p;
    for (int v : truth) truth_p.push_back((v + 1) % 3);
    for (int v : preds) preds_p.push_back((v + 1) % 3);

    const MetricsReport a = macro_report(confusion(truth, preds, 3));
    const MetricsReport b = macro_report(confusion(truth_p, preds_p, 3));
    CHECK(a.precision == doctest::Approx(b.precision).epsilon(1e-15));
    CHECK(a.recall == doctest::Approx(b.recall).epsilon(1e-15));
    CHECK(a.accuracy == doctest::Approx(b.accuracy).epsilon(1e-15));
    CHECK(a.f_score == doctest::Approx(b.f_score).epsilon(1e-15));
    for (int c = 0; c < 3; ++c) {
        CHECK(a.per_class[static_cast<size_t>(c)].f1 ==
              doctest::Approx(b.per_class[static_cast<size_t>((c + 1) % 3)].f1).epsilon(1e-15));
    }
}

TEST_CASE("metrics stay in [0, 1], accuracy is exactly trace over total") {
    const std::vector<int> truth = {0, 1, 1, 2, 2, 2, 0, 1, 2, 0};
    const std::vector<int> preds = {1, 1, 0, 2, 1, 2, 0, 2, 2, 0};
    const ConfusionMatrix cm = confusion(truth, preds, 3);
    const MetricsReport r = macro_report(cm);
    for (double v : {r.precision, r.recall, r.accuracy, r.f_score, r.macro_f1_mean, r.macro_f1_of_means}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(r.accuracy == static_cast<double>(cm.trace()) / static_cast<double>(cm.total()));
}

TEST_CASE("both macro-F1 conventions are computed; the mean-of-F1s one is reported") {
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 8;
    cm.at(0, 1) = 2;
    cm.at(1, 0) = 4;
    cm.at(1, 1) = 1;
    const MetricsReport r = macro_report(cm);
    CHECK(r.f_score == r.macro_f1_mean);
    CHECK(r.macro_f1_mean != r.macro_f1_of_means);  // they genuinely differ on skewed matrices
    const double mp = r.precision, mr = r.recall;
    CHECK(r.macro_f1_of_means == doctest::Approx(2.0 * mp * mr / (mp + mr)).epsilon(1e-12));
}
