#include <gtest/gtest.h>

#include <sstream>

#include "fedmeta/evaluation.hpp"
#include "fedmeta/svg.hpp"

using namespace fedmeta;

namespace {

std::vector<EvalRecord> with_losses(std::vector<double> losses) {
    std::vector<EvalRecord> out;
    for (std::size_t i = 0; i < losses.size(); ++i) out.push_back({i, "t", losses[i]});
    return out;
}

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

const MlpSpec sine_net{{1, 40, 40, 1}};

} // namespace

TEST(Cdf, SingleRecord) {
    const auto cdf = emit_cdf(with_losses({0.7}), Metric::loss);
    ASSERT_EQ(cdf.size(), 1u);
    EXPECT_EQ(cdf[0].value, 0.7);
    EXPECT_EQ(cdf[0].fraction, 1.0);
}

TEST(Cdf, ThirdsAndSorting) {
    const auto cdf = emit_cdf(with_losses({3, 1, 2}), Metric::loss);
    ASSERT_EQ(cdf.size(), 3u);
    EXPECT_EQ(cdf[0].value, 1);
    EXPECT_EQ(cdf[2].value, 3);
    EXPECT_DOUBLE_EQ(cdf[0].fraction, 1.0 / 3);
    EXPECT_DOUBLE_EQ(cdf[1].fraction, 2.0 / 3);
    EXPECT_EQ(cdf[2].fraction, 1.0);
}

TEST(Cdf, DuplicatesMakeADoubleStep) {
    const auto cdf = emit_cdf(with_losses({5, 2, 2, 9}), Metric::loss);
    // Nothing lies below 2, and both copies of 2 are reached at fraction 2/4.
    EXPECT_EQ(cdf[0].value, 2);
    EXPECT_EQ(cdf[1].value, 2);
    EXPECT_DOUBLE_EQ(cdf[1].fraction, 0.5);
    EXPECT_DOUBLE_EQ(cdf[2].fraction, 0.75);
}

TEST(Cdf, MonotoneAndEndsAtOneForManyValues) {
    std::vector<double> v;
    for (int i = 0; i < 997; ++i) v.push_back(std::fmod(i * 7.31, 13.0));
    const auto cdf = emit_cdf(with_losses(v), Metric::loss);
    for (std::size_t i = 1; i < cdf.size(); ++i) {
        EXPECT_LE(cdf[i - 1].value, cdf[i].value);
        EXPECT_LE(cdf[i - 1].fraction, cdf[i].fraction);
    }
    EXPECT_EQ(cdf.back().fraction, 1.0);
}

TEST(Cdf, EmptyIsAnError) {
    try {
        emit_cdf(std::vector<EvalRecord>{}, Metric::loss);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::empty_input);
    }
}

TEST(Stats, MedianAndCi) {
    EXPECT_EQ(median({3, 1, 2}), 2);
    EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
    const auto ci = binomial_normal_ci95(0.5, 100);
    EXPECT_NEAR(ci.low, 0.5 - 0.098, 1e-12);
    EXPECT_NEAR(ci.high, 0.5 + 0.098, 1e-12);
    EXPECT_TRUE(ci.contains(0.5));
    EXPECT_FALSE(ci.contains(0.3));
}

TEST(Finetune, ZeroStepsIsZeroShot) {
    SinusoidTask t;
    t.amplitude = 3;
    t.train_size = 40;
    t.seed = 4;
    const auto task = sample_sinusoid(t);
    Rng rng(1);
    const auto theta = init_params(sine_net, rng);
    FinetuneSettings ft;
    ft.steps = 0;
    const auto r = finetune_and_eval(sine_net, theta, task, ft, rng);
    EXPECT_DOUBLE_EQ(r.loss, loss(sine_net, theta, task.test));
    EXPECT_TRUE(std::isnan(r.accuracy));
    EXPECT_EQ(r.task, task.descriptor);
}

TEST(Finetune, TrainedOnAmplitudeBeatsRandomInitOnIt) {
    SinusoidTask big;
    big.amplitude = 6;
    big.seed = 5;
    const auto meta = sample_sinusoid(big);
    Rng rng(2);
    const auto random = init_params(sine_net, rng);
    const auto trained = sgd(sine_net, random, meta.train, 1500, 0.01, 100, rng);

    SinusoidTask fresh = big;
    fresh.train_size = 40;
    fresh.seed = 6;
    const auto task = sample_sinusoid(fresh);
    FinetuneSettings ft;
    Rng a(3), b(3);
    EXPECT_LT(finetune_and_eval(sine_net, trained, task, ft, a).loss,
              finetune_and_eval(sine_net, random, task, ft, b).loss);
}

TEST(Finetune, RandomClassifierIsAtChance) {
    // Pure-noise "digits": after fine-tuning the head only predicts the five
    // digits present, and no model can beat 1/5 on held-out noise.
    const std::uint32_t pixels = 784, per_digit = 40;
    Rng data_rng(7);
    std::uniform_int_distribution<int> byte(0, 255);
    IdxTensor images{{10 * per_digit, 28, 28}, {}};
    IdxTensor labels{{10 * per_digit}, {}};
    for (std::size_t i = 0; i < 10 * per_digit; ++i) {
        for (std::size_t p = 0; p < pixels; ++p) images.data.push_back(static_cast<std::uint8_t>(byte(data_rng)));
        labels.data.push_back(static_cast<std::uint8_t>(i % 10));
    }
    const MnistCorpus corpus(images, labels, Split::test);
    const MlpSpec net{{784, 8, 8, 10}, Activation::relu, Head::softmax_cross_entropy};
    FinetuneSource source;
    source.kind = TaskKind::classification;
    source.corpus = &corpus;
    source.test_per_class = 20;
    FinetuneSettings ft{10, 100, 0.1, 1000};
    Rng init_rng(8);
    const auto theta = init_params(net, init_rng);
    const auto records = evaluate_trials(net, theta, source, ft, 200, 99);
    const double acc = mean_of(metric_values(records, Metric::accuracy));
    EXPECT_NEAR(acc, 0.2, 0.05);
}

TEST(EvaluateTrials, PrefixStableWhenAddingTrials) {
    FinetuneSource source;
    FinetuneSettings ft;
    ft.steps = 3;
    Rng rng(9);
    const auto theta = init_params(sine_net, rng);
    const auto few = evaluate_trials(sine_net, theta, source, ft, 4, 11);
    const auto many = evaluate_trials(sine_net, theta, source, ft, 9, 11);
    for (std::size_t i = 0; i < few.size(); ++i) {
        EXPECT_EQ(few[i].trial, i);
        EXPECT_EQ(few[i].loss, many[i].loss);
        EXPECT_EQ(few[i].task, many[i].task);
    }
}

TEST(EvalCsv, RegressionAndClassificationLayouts) {
    std::ostringstream reg, cls;
    write_eval_csv(reg, std::vector<EvalRecord>{{0, "A=2", 0.5}});
    EXPECT_EQ(reg.str(), "trial,task,loss\n0,A=2,0.5\n");
    write_eval_csv(cls, std::vector<EvalRecord>{{3, "0|1", 1.25, 0.75}});
    EXPECT_EQ(cls.str(), "trial,task,loss,accuracy\n3,0|1,1.25,0.75\n");
}

TEST(Svg, OneSeriesTwoPointsIsOnePolyline) {
    const std::vector<svg::LineSeries> s{{"a", {{0.0, 0.5}, {1.0, 1.0}}}};
    const auto text = svg::cdf_lines(s, "t", "loss");
    EXPECT_EQ(count(text, "<polyline"), 1u);
    EXPECT_EQ(text.rfind("<svg", 0), 0u);
    EXPECT_EQ(text, svg::cdf_lines(s, "t", "loss"));
}

TEST(Svg, GroupedBarsTwoByTwoIsFourBars) {
    svg::BarChart chart{{"mb", "imaml"}, {{"energy", {1.0, 3.0}}, {"evals", {10.0, 40.0}}}};
    const auto text = svg::grouped_bars(chart, "cost");
    // Background plus two legend swatches plus the bars.
    EXPECT_EQ(count(text, "<rect"), 1u + 2u + 4u);
    EXPECT_EQ(count(text, "</rect>"), 4u);
    EXPECT_EQ(text, svg::grouped_bars(chart, "cost"));
}

TEST(Svg, RejectsEmptyAndRaggedInput) {
    EXPECT_THROW(svg::cdf_lines(std::vector<svg::LineSeries>{}, "t", "x"), error);
    svg::BarChart ragged{{"a", "b"}, {{"m", {1.0}}}};
    EXPECT_THROW(svg::grouped_bars(ragged, "t"), error);
}
