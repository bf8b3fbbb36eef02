#include <catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>

#include "bfd/eval.hpp"
#include "bfd/rng.hpp"
#include "json.hpp"

using namespace bfd;
using Catch::Approx;

namespace {

constexpr FaultClass H = FaultClass::Healthy;
constexpr FaultClass F = FaultClass::Faulty;
constexpr FaultClass D = FaultClass::DevelopingFault;

ConfusionMatrix random_confusion(Rng& rng) {
    ConfusionMatrix cm;
    cm.total = 0;
    for (int a = 0; a < kNumClasses; ++a) {
        for (int p = 0; p < kNumClasses; ++p) {
            cm.c[a][p] = static_cast<std::int64_t>(rng.below(40));
            cm.total += cm.c[a][p];
        }
    }
    if (cm.total == 0) {
        cm.c[0][0] = 1;
        cm.total = 1;
    }
    return cm;
}

}  // namespace

TEST_CASE("confusion counting") {
    const auto cm = confusion_from_predictions({H, H, F}, {H, F, F});
    CHECK(cm.c[class_index(H)][class_index(H)] == 1);
    CHECK(cm.c[class_index(H)][class_index(F)] == 1);
    CHECK(cm.c[class_index(F)][class_index(F)] == 1);
    CHECK(cm.total == 3);
    CHECK(metrics_from_confusion(cm).accuracy == Approx(2.0 / 3));

    CHECK_THROWS_AS(confusion_from_predictions({H}, {H, F}), LengthMismatch);
    CHECK_THROWS_AS(confusion_from_predictions({}, {}), InvalidParam);
}

TEST_CASE("perfect predictions give a diagonal matrix") {
    std::vector<FaultClass> labels;
    for (int i = 0; i < 60; ++i) labels.push_back(class_from_index(i % 3));
    const auto cm = confusion_from_predictions(labels, labels);
    CHECK(cm.trace() == 60);
    const auto m = metrics_from_confusion(cm);
    CHECK(m.accuracy == 1.0);
    CHECK(m.macro.f1 == 1.0);
}

TEST_CASE("hand-computed metrics case") {
    ConfusionMatrix cm;
    cm.c = {{{10, 0, 0}, {10, 0, 0}, {0, 0, 10}}};
    cm.total = 30;
    const auto m = metrics_from_confusion(cm);
    CHECK(m.per_class[0].recall == 1.0);          // DevelopingFault
    CHECK(m.per_class[0].precision == 0.5);
    CHECK(m.per_class[1].recall == 0.0);          // Faulty
    CHECK(m.accuracy == Approx(20.0 / 30));
    CHECK(m.per_class[1].zero_division);          // no predicted Faulty at all
}

TEST_CASE("uniform random predictions sit at chance") {
    Rng rng(55);
    std::vector<FaultClass> actuals, preds;
    for (int i = 0; i < 10000; ++i) {
        actuals.push_back(class_from_index(i % 3));
        preds.push_back(class_from_index(static_cast<int>(rng.below(3))));
    }
    const auto m = metrics_from_confusion(confusion_from_predictions(actuals, preds));
    CHECK(m.accuracy == Approx(1.0 / 3).margin(0.03));
}

TEST_CASE("metric identities on random confusion matrices") {
    Rng rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto cm = random_confusion(rng);
        const auto m = metrics_from_confusion(cm);
        CHECK(m.accuracy ==
              static_cast<double>(cm.trace()) / static_cast<double>(cm.total));
        const double lo = std::min({m.per_class[0].f1, m.per_class[1].f1, m.per_class[2].f1});
        const double hi = std::max({m.per_class[0].f1, m.per_class[1].f1, m.per_class[2].f1});
        CHECK(m.macro.f1 >= lo - 1e-12);
        CHECK(m.macro.f1 <= hi + 1e-12);
        for (int k = 0; k < kNumClasses; ++k) {
            CHECK(m.per_class[k].precision >= 0.0);
            CHECK(m.per_class[k].precision <= 1.0);
            CHECK(m.per_class[k].recall >= 0.0);
            CHECK(m.per_class[k].recall <= 1.0);
        }
    }
}

TEST_CASE("metrics are invariant under pair permutation") {
    Rng rng(13);
    std::vector<FaultClass> actuals, preds;
    for (int i = 0; i < 500; ++i) {
        actuals.push_back(class_from_index(static_cast<int>(rng.below(3))));
        preds.push_back(class_from_index(static_cast<int>(rng.below(3))));
    }
    const auto base = metrics_from_confusion(confusion_from_predictions(actuals, preds));

    std::vector<std::size_t> order(actuals.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<FaultClass> a2, p2;
    for (auto i : order) {
        a2.push_back(actuals[i]);
        p2.push_back(preds[i]);
    }
    const auto perm = metrics_from_confusion(confusion_from_predictions(a2, p2));
    CHECK(perm.accuracy == base.accuracy);
    CHECK(perm.macro.f1 == base.macro.f1);
    for (int k = 0; k < kNumClasses; ++k) {
        CHECK(perm.per_class[k].precision == base.per_class[k].precision);
        CHECK(perm.per_class[k].recall == base.per_class[k].recall);
    }
}

TEST_CASE("report JSON is deterministic and roundtrips") {
    std::vector<FaultClass> actuals = {H, F, D, H, F, D};
    std::vector<FaultClass> preds = {H, F, D, F, F, D};
    std::vector<EpisodePoint> curve = {{1, 12.5, 1.0}, {2, 30.0, 0.995}};
    const auto r1 = build_report(8, 42, "abc123", preds, actuals, curve);
    const auto r2 = build_report(8, 42, "abc123", preds, actuals, curve);
    const auto j1 = report_to_json(r1);
    CHECK(j1 == report_to_json(r2));

    const auto parsed = nlohmann::json::parse(j1);
    CHECK(parsed.at("model_id") == 8);
    CHECK(parsed.at("seed") == 42);
    CHECK(parsed.at("config_digest") == "abc123");
    CHECK(parsed.at("accuracy").get<double>() == Approx(r1.accuracy).margin(5e-7));
    CHECK(parsed.at("reward_curve").size() == 2);
    CHECK(parsed.at("confusion")[1][1].get<int>() ==
          r1.confusion.c[1][1]);
    CHECK(parsed.at("per_class").contains("developing_fault"));
    CHECK(parsed.at("per_class").contains("faulty"));
    CHECK(parsed.at("per_class").contains("healthy"));

    // reward curve present only when supplied
    const auto bare = report_to_json(build_report(5, 1, "d", preds, actuals));
    CHECK(!nlohmann::json::parse(bare).contains("reward_curve"));
}

TEST_CASE("cumulative curve total matches the per-episode sum") {
    std::vector<EpisodePoint> curve;
    double total = 0;
    Rng rng(2);
    for (int ep = 1; ep <= 50; ++ep) {
        const double r = rng.uniform(-30, 60);
        curve.push_back({ep, r, 1.0});
        total += r;
    }
    double from_curve = 0;
    for (const auto& e : curve) from_curve += e.cumulative_reward;
    CHECK(from_curve == Approx(total).margin(1e-9));
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].episode == curve[i - 1].episode + 1);
    }
}
