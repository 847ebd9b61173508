#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "fedmeta/tasks.hpp"

using namespace fedmeta;

namespace {

// Tiny synthetic corpus: `per_digit` images of every digit; pixel 0 of
// image i stores i so rows can be traced back to corpus indices.
MnistCorpus synthetic_corpus(std::uint32_t per_digit) {
    IdxTensor images{{per_digit * 10, 28, 28}, {}};
    IdxTensor labels{{per_digit * 10}, {}};
    for (std::uint32_t i = 0; i < per_digit * 10; ++i) {
        std::vector<std::uint8_t> img(784, 0);
        img[0] = static_cast<std::uint8_t>(i % 256);
        img[1] = static_cast<std::uint8_t>(i / 256);
        images.data.insert(images.data.end(), img.begin(), img.end());
        labels.data.push_back(static_cast<std::uint8_t>(i % 10));
    }
    return MnistCorpus(images, labels, Split::train);
}

std::size_t row_id(const Batch& b, std::size_t r) {
    return static_cast<std::size_t>(std::lround(b.input(r)[0] * 255.0)) +
           256 * static_cast<std::size_t>(std::lround(b.input(r)[1] * 255.0));
}

std::map<int, std::size_t> label_counts(const Batch& b) {
    std::map<int, std::size_t> counts;
    for (int y : b.labels) ++counts[y];
    return counts;
}

} // namespace

TEST(Sinusoid, ZeroAmplitudeGivesZeroTargets) {
    SinusoidTask task;
    task.amplitude = 0.0;
    task.train_size = 10;
    task.test_size = 5;
    const auto data = sample_sinusoid(task);
    for (double y : data.train.targets) EXPECT_EQ(y, 0.0);
    for (double y : data.test.targets) EXPECT_EQ(y, 0.0);
}

TEST(Sinusoid, PeakAtHalfPi) { EXPECT_DOUBLE_EQ(sinusoid_target(2.0, 0.0, std::numbers::pi / 2), 2.0); }

TEST(Sinusoid, DeterministicGivenSeed) {
    SinusoidTask task;
    task.amplitude = 6.0;
    task.seed = 99;
    const auto a = sample_sinusoid(task);
    const auto b = sample_sinusoid(task);
    EXPECT_EQ(a.train.inputs, b.train.inputs);
    EXPECT_EQ(a.test.targets, b.test.targets);
    task.seed = 100;
    EXPECT_NE(sample_sinusoid(task).train.inputs, a.train.inputs);
}

TEST(Sinusoid, TargetsReproduceFormulaInRange) {
    SinusoidTask task;
    task.amplitude = 3.7;
    task.phase = 0.4;
    task.seed = 5;
    const auto data = sample_sinusoid(task);
    EXPECT_EQ(data.train.size, 1000u);
    EXPECT_EQ(data.test.size, 100u);
    for (const Batch* b : {&data.train, &data.test}) {
        for (std::size_t i = 0; i < b->size; ++i) {
            const double x = b->inputs[i];
            EXPECT_GE(x, -5.0);
            EXPECT_LE(x, 5.0);
            EXPECT_EQ(b->targets[i], 3.7 * std::sin(x + 0.4));
        }
    }
}

TEST(Sinusoid, RejectsNegativeAmplitude) {
    SinusoidTask task;
    task.amplitude = -1.0;
    EXPECT_THROW(sample_sinusoid(task), error);
}

TEST(SplitEvenly, RemainderGoesToLeadingBuckets) {
    EXPECT_EQ(split_evenly(400, 3), (std::vector<std::size_t>{134, 133, 133}));
    EXPECT_EQ(split_evenly(100, 3), (std::vector<std::size_t>{34, 33, 33}));
    EXPECT_EQ(split_evenly(50, 5), (std::vector<std::size_t>{10, 10, 10, 10, 10}));
}

TEST(Classification, FourHundredTrainOneHundredTestSplitAcrossThreeDigits) {
    const auto corpus = synthetic_corpus(200);
    const auto data = build_classification_task(corpus, {{0, 1, 2}, 400, 100, 1});
    EXPECT_EQ(data.train.size, 400u);
    EXPECT_EQ(data.test.size, 100u);
    EXPECT_EQ(label_counts(data.train), (std::map<int, std::size_t>{{0, 134}, {1, 133}, {2, 133}}));
    EXPECT_EQ(label_counts(data.test), (std::map<int, std::size_t>{{0, 34}, {1, 33}, {2, 33}}));
    EXPECT_EQ(data.descriptor, "0|1|2");
}

TEST(Classification, TrainAndTestAreDisjoint) {
    const auto corpus = synthetic_corpus(60);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = build_classification_task(corpus, ClassificationTask::per_class({7, 8, 9}, 30, 25, seed));
        std::set<std::size_t> train_ids;
        for (std::size_t r = 0; r < data.train.size; ++r) train_ids.insert(row_id(data.train, r));
        EXPECT_EQ(train_ids.size(), data.train.size);
        for (std::size_t r = 0; r < data.test.size; ++r) EXPECT_FALSE(train_ids.count(row_id(data.test, r)));
        for (std::size_t r = 0; r < data.train.size; ++r)
            EXPECT_EQ(static_cast<int>(row_id(data.train, r) % 10), data.train.labels[r]);
    }
}

TEST(Classification, SingleDigitSingleSample) {
    const auto corpus = synthetic_corpus(5);
    const auto data = build_classification_task(corpus, ClassificationTask::per_class({3}, 1, 1, 0));
    EXPECT_EQ(data.train.labels, std::vector<int>{3});
    EXPECT_EQ(data.test.labels, std::vector<int>{3});
}

TEST(Classification, RejectsDuplicatesAndShortage) {
    const auto corpus = synthetic_corpus(5);
    try {
        build_classification_task(corpus, ClassificationTask::per_class({1, 1}, 1, 1, 0));
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::invalid_argument);
    }
    try {
        build_classification_task(corpus, ClassificationTask::per_class({4}, 4, 2, 0));
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::insufficient_samples);
    }
}

TEST(Classification, PixelsNormalizedToUnitInterval) {
    IdxTensor images{{1, 28, 28}, std::vector<std::uint8_t>(784, 255)};
    IdxTensor labels{{1}, {4}};
    MnistCorpus corpus(images, labels, Split::test);
    const std::size_t row = 0;
    const auto batch = corpus.to_batch(std::span(&row, 1));
    for (double v : batch.inputs) EXPECT_EQ(v, 1.0);
}

TEST(MnistCorpus, RejectsCountMismatch) {
    IdxTensor images{{2, 28, 28}, std::vector<std::uint8_t>(2 * 784)};
    IdxTensor labels{{1}, {4}};
    try {
        MnistCorpus(images, labels, Split::train);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::dimension_mismatch);
    }
}

TEST(FinetuneTask, SinusoidAmplitudeInRangeAndDeterministic) {
    FinetuneSource source;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng a(seed), b(seed);
        const auto t1 = sample_finetune_task(a, source, 40);
        const auto t2 = sample_finetune_task(b, source, 40);
        EXPECT_EQ(t1.train.inputs, t2.train.inputs);
        EXPECT_EQ(t1.train.size, 40u);
        const double amplitude = std::stod(t1.descriptor.substr(2));
        EXPECT_GE(amplitude, 0.1);
        EXPECT_LE(amplitude, 10.0);
    }
}

TEST(FinetuneTask, FiveWayTenShot) {
    const auto corpus = synthetic_corpus(40);
    FinetuneSource source;
    source.kind = TaskKind::classification;
    source.corpus = &corpus;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const auto task = sample_finetune_task(rng, source, 10);
        const auto counts = label_counts(task.train);
        EXPECT_EQ(counts.size(), 5u);
        for (const auto& [digit, n] : counts) EXPECT_EQ(n, 10u);
        EXPECT_EQ(task.train.size, 50u);
        EXPECT_EQ(label_counts(task.test).size(), 5u);
    }
}

TEST(FinetuneTask, ClassificationWithoutCorpusIsMissingData) {
    FinetuneSource source;
    source.kind = TaskKind::classification;
    Rng rng(0);
    try {
        sample_finetune_task(rng, source, 10);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::missing_data);
    }
}

TEST(Mnist, BundledSubsetLoads) {
    const std::filesystem::path dir = FEDMETA_MNIST_DIR;
    if (!std::filesystem::exists(dir / "train-images-idx3-ubyte")) GTEST_SKIP() << "no MNIST files at " << dir;
    const auto train = load_mnist(dir, Split::train);
    const auto test = load_mnist(dir, Split::test);
    EXPECT_EQ(train.pixels(), 784u);
    EXPECT_GE(train.size(), 1000u);
    EXPECT_GE(test.size(), 100u);
    const auto task = build_classification_task(train, {{0, 1, 2}, 400, 100, 3});
    EXPECT_EQ(task.train.size, 400u);
}
