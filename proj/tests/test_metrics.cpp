#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hierlogit/metrics.hpp"

using namespace hierlogit;

namespace {

HierarchicalPrediction set_of(std::vector<std::size_t> labels, double posterior) {
    HierarchicalPrediction p;
    p.kind = PredictionKind::Set;
    p.labels = std::move(labels);
    p.posterior = posterior;
    return p;
}

HierarchicalPrediction tree_node(PredictionKind kind, std::vector<std::size_t> labels, double posterior) {
    HierarchicalPrediction p;
    p.kind = kind;
    p.node = 0;
    p.labels = std::move(labels);
    p.posterior = posterior;
    return p;
}

}  // namespace

TEST(Outcome, CorrectBaseSide) {
    EXPECT_EQ(classify_outcome(tree_node(PredictionKind::Terminal, {1}, 0.9), 1, 1, 4), Outcome::CPersist);
    EXPECT_EQ(classify_outcome(tree_node(PredictionKind::Superclass, {0, 1}, 0.9), 1, 1, 4), Outcome::CSoft);
    EXPECT_EQ(classify_outcome(tree_node(PredictionKind::Superclass, {2, 3}, 0.9), 1, 1, 4), Outcome::CCorrupt);
    EXPECT_EQ(classify_outcome(tree_node(PredictionKind::Root, {0, 1, 2, 3}, 1.0), 1, 1, 4), Outcome::CWithdrawn);
}

TEST(Outcome, IncorrectBaseSide) {
    EXPECT_EQ(classify_outcome(tree_node(PredictionKind::Terminal, {0}, 0.9), 1, 0, 4), Outcome::ICPersist);
    EXPECT_EQ(classify_outcome(tree_node(PredictionKind::Superclass, {0, 1}, 0.9), 1, 0, 4), Outcome::ICReform);
    EXPECT_EQ(classify_outcome(tree_node(PredictionKind::Superclass, {0, 2}, 0.9), 1, 0, 4), Outcome::ICRemain);
    EXPECT_EQ(classify_outcome(tree_node(PredictionKind::Root, {0, 1, 2, 3}, 1.0), 1, 0, 4), Outcome::ICWithdrawn);
}

TEST(Outcome, SetPredictions) {
    EXPECT_EQ(classify_outcome(set_of({2}, 0.9), 2, 2, 3), Outcome::CPersist);
    EXPECT_EQ(classify_outcome(set_of({1, 2}, 0.9), 2, 2, 3), Outcome::CSoft);
    EXPECT_EQ(classify_outcome(set_of({0, 1, 2}, 1.0), 2, 2, 3), Outcome::CWithdrawn);
    EXPECT_EQ(classify_outcome(set_of({0, 1}, 0.9), 1, 0, 3), Outcome::ICReform);
    EXPECT_EQ(classify_outcome(set_of({0, 2}, 0.9), 1, 0, 3), Outcome::ICRemain);
    EXPECT_EQ(classify_outcome(set_of({0, 1, 2}, 1.0), 1, 0, 3), Outcome::ICWithdrawn);
}

TEST(AvgSig, Extremes) {
    const std::vector<std::size_t> truths{0, 1, 2, 3};
    std::vector<HierarchicalPrediction> exact, root;
    for (std::size_t t : truths) {
        exact.push_back(set_of({t}, 0.9));
        root.push_back(set_of({0, 1, 2, 3}, 1.0));
    }
    EXPECT_DOUBLE_EQ(avg_sig(exact, truths, 4), 1.0);
    EXPECT_DOUBLE_EQ(avg_sig(root, truths, 4), 0.0);
}

TEST(AvgSig, PairOutOfTen) {
    const std::vector<std::size_t> truths{3};
    const std::vector<HierarchicalPrediction> preds{set_of({3, 4}, 0.9)};
    EXPECT_NEAR(avg_sig(preds, truths, 10), 1.0 - std::log2(2.0) / std::log2(10.0), 1e-15);
    EXPECT_NEAR(avg_sig(preds, truths, 10), 0.69897, 1e-5);
}

TEST(AvgSig, WrongPredictionsScoreZero) {
    const std::vector<std::size_t> truths{0, 0};
    const std::vector<HierarchicalPrediction> preds{set_of({1}, 0.9), set_of({0}, 0.9)};
    EXPECT_DOUBLE_EQ(avg_sig(preds, truths, 3), 0.5);
    EXPECT_THROW(avg_sig({}, {}, 3), InvalidArgument);
}

TEST(Topsis, Anchors) {
    EXPECT_DOUBLE_EQ(topsis(kTopsisBest), 1.0);
    EXPECT_DOUBLE_EQ(topsis(kTopsisWorst), 0.0);
    const Criteria mid{0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0, 0.5};
    EXPECT_NEAR(topsis(mid), 0.5, 1e-15);
}

TEST(Topsis, MonotoneInEachCriterion) {
    const Criteria base{0.5, 0.1, 0.1, 0.3, 0.4, 0.3, 0.2, 0.1, 0.5};
    const double t0 = topsis(base);
    for (std::size_t k = 0; k < base.size(); ++k) {
        auto moved = base;
        moved[k] += kTopsisBest[k] > kTopsisWorst[k] ? 0.05 : -0.05;
        if (kTopsisBest[k] == kTopsisWorst[k]) {
            continue;
        }
        EXPECT_GT(topsis(moved), t0) << "criterion " << k;
    }
}

TEST(Topsis, RejectsOutOfRange) {
    Criteria bad = kTopsisBest;
    bad[0] = 1.5;
    EXPECT_THROW(topsis(bad), InvalidArgument);
}

TEST(Ece, PerfectCalibration) {
    std::vector<HierarchicalPrediction> preds;
    std::vector<std::size_t> truths;
    for (int k = 0; k < 10; ++k) {
        preds.push_back(set_of({0}, 0.95));
        truths.push_back(0);
    }
    for (int k = 0; k < 10; ++k) {
        preds.push_back(set_of({0}, 0.95));
        truths.push_back(k == 0 ? 1 : 0);
    }
    // 19 of 20 correct at confidence 0.95
    EXPECT_NEAR(*ece(preds, truths, 3, 0.9), 0.0, 1e-15);
}

TEST(Ece, HalfWrong) {
    const std::vector<HierarchicalPrediction> preds{set_of({0}, 1.0), set_of({0}, 1.0)};
    const std::vector<std::size_t> truths{0, 1};
    EXPECT_NEAR(*ece(preds, truths, 3, 0.0), 0.5, 1e-15);
}

TEST(Ece, TwoBins) {
    // bin [0.9,0.95): conf 0.9, 1 of 2 correct -> gap 0.4; bin [0.95,1]: conf 1.0, 2 of 2 -> gap 0
    const std::vector<HierarchicalPrediction> preds{set_of({0}, 0.9), set_of({0}, 0.9), set_of({0}, 1.0),
                                                    set_of({0}, 1.0)};
    const std::vector<std::size_t> truths{0, 1, 0, 0};
    EXPECT_NEAR(*ece(preds, truths, 3, 0.5), 0.2, 1e-15);
}

TEST(Ece, WithdrawnExcluded) {
    const std::vector<HierarchicalPrediction> all_withdrawn{set_of({0, 1, 2}, 1.0), set_of({0, 1, 2}, 1.0)};
    const std::vector<std::size_t> truths{0, 1};
    EXPECT_FALSE(ece(all_withdrawn, truths, 3, 0.9).has_value());
    const std::vector<HierarchicalPrediction> mixed{set_of({0, 1, 2}, 1.0), set_of({1}, 0.9)};
    EXPECT_NEAR(*ece(mixed, truths, 3, 0.8), 0.1, 1e-15);
}

TEST(Ece, BinEdges) {
    // With T=0 the bins are [0,0.1), ..., [0.9,1].
    const std::vector<HierarchicalPrediction> preds{set_of({0}, 0.15), set_of({1}, 0.35)};
    const std::vector<std::size_t> truths{0, 0};
    // separate bins: |1-0.15|/2 + |0-0.35|/2
    EXPECT_NEAR(*ece(preds, truths, 3, 0.0), 0.6, 1e-15);
    const std::vector<HierarchicalPrediction> top{set_of({0}, 1.0), set_of({1}, 0.9)};
    // both in the last bin: |0.5 - 0.95|
    EXPECT_NEAR(*ece(top, truths, 3, 0.0), 0.45, 1e-12);
    EXPECT_THROW(ece(top, truths, 3, 1.0), InvalidArgument);
}

TEST(Report, FractionsAndNa) {
    const std::vector<HierarchicalPrediction> preds{set_of({0}, 0.95), set_of({0, 1}, 0.92)};
    const std::vector<std::size_t> truths{0, 1};
    const std::vector<std::size_t> base{0, 1};
    const auto r = evaluate(preds, truths, base, 3, 0.9);
    EXPECT_EQ(r.correct_count, 2u);
    EXPECT_EQ(r.incorrect_count, 0u);
    EXPECT_DOUBLE_EQ(*r.c_persist, 0.5);
    EXPECT_DOUBLE_EQ(*r.c_soft, 0.5);
    EXPECT_FALSE(r.ic_persist.has_value());
    EXPECT_FALSE(r.topsis.has_value());
    const auto kv = report_key_values(r);
    EXPECT_NE(kv.find("ic_reform=NA\n"), std::string::npos);
    EXPECT_NE(kv.find("topsis=NA\n"), std::string::npos);
    EXPECT_NE(kv.find("c_persist=0.5\n"), std::string::npos);
    EXPECT_EQ(report_csv_header(),
              "n_correct,n_incorrect,c_persist,c_soft,c_withdrawn,c_corrupt,ic_persist,ic_reform,ic_remain,"
              "ic_withdrawn,avg_sig,topsis,ece");
}

TEST(Report, FractionsSumToOnePerSide) {
    const std::vector<HierarchicalPrediction> preds{set_of({0}, 0.95), set_of({0, 1}, 0.92), set_of({0, 1, 2}, 1.0),
                                                    set_of({2}, 0.9),  set_of({1, 2}, 0.93), set_of({0}, 0.91)};
    const std::vector<std::size_t> truths{0, 1, 2, 0, 1, 1};
    const std::vector<std::size_t> base{0, 1, 2, 2, 2, 0};
    const auto r = evaluate(preds, truths, base, 3, 0.9);
    EXPECT_NEAR(*r.c_persist + *r.c_soft + *r.c_withdrawn + *r.c_corrupt, 1.0, 1e-15);
    EXPECT_NEAR(*r.ic_persist + *r.ic_reform + *r.ic_remain + *r.ic_withdrawn, 1.0, 1e-15);
    ASSERT_TRUE(r.topsis.has_value());
    EXPECT_NEAR(*r.topsis, topsis(*r.criteria()), 0.0);
    EXPECT_FALSE(evaluate(preds, truths, base, 3, 1.0).ece.has_value());
}
