#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedmeta/error.hpp"
#include "fedmeta/idx.hpp"
#include "fedmeta/nn.hpp"
#include "fedmeta/random.hpp"

namespace fedmeta {

/// Train and held-out splits of one task. `descriptor` names the task in
/// reports (an amplitude, or a digit set).
struct TaskDataset {
    Batch train;
    Batch test;
    std::string descriptor;
};

// ---------------------------------------------------------------- sinusoid

enum class PhaseMode { fixed, random };

struct SinusoidSettings {
    double x_min = -5.0;
    double x_max = 5.0;
    PhaseMode phase_mode = PhaseMode::fixed;
    double fixed_phase = 0.0;
    std::size_t train_size = 1000;
    std::size_t test_size = 100;
};

struct SinusoidTask {
    double amplitude = 1.0;
    double phase = 0.0;
    double x_min = -5.0;
    double x_max = 5.0;
    std::size_t train_size = 1000;
    std::size_t test_size = 100;
    std::uint64_t seed = 0;
};

inline double sinusoid_target(double amplitude, double phase, double x) { return amplitude * std::sin(x + phase); }

inline std::string describe_amplitude(double amplitude, double phase) {
    std::ostringstream os;
    os.precision(6);
    os << "A=" << amplitude;
    if (phase != 0.0) os << ";phase=" << phase;
    return os.str();
}

/// Inputs are i.i.d. uniform on [x_min, x_max]; the train split is drawn
/// first, then the test split, from one stream seeded by `task.seed`.
inline TaskDataset sample_sinusoid(const SinusoidTask& task) {
    require(task.amplitude >= 0.0 && std::isfinite(task.amplitude), errc::invalid_argument,
            "sinusoid amplitude must be finite and non-negative");
    require(task.x_min < task.x_max, errc::invalid_argument, "sinusoid input range is empty");
    require(task.train_size >= 1 && task.test_size >= 1, errc::invalid_argument, "sinusoid splits must be non-empty");
    Rng rng(task.seed);
    std::uniform_real_distribution<double> xs(task.x_min, task.x_max);
    auto draw = [&](std::size_t n) {
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = xs(rng);
            y[i] = sinusoid_target(task.amplitude, task.phase, x[i]);
        }
        return Batch::regression(1, 1, std::move(x), std::move(y));
    };
    TaskDataset out;
    out.train = draw(task.train_size);
    out.test = draw(task.test_size);
    out.descriptor = describe_amplitude(task.amplitude, task.phase);
    return out;
}

// ------------------------------------------------------------------- MNIST

enum class Split { train, test };

struct MnistFileNames {
    std::string train_images = "train-images-idx3-ubyte";
    std::string train_labels = "train-labels-idx1-ubyte";
    std::string test_images = "t10k-images-idx3-ubyte";
    std::string test_labels = "t10k-labels-idx1-ubyte";
};

/// Raw digit images and labels. Immutable after construction.
class MnistCorpus {
public:
    MnistCorpus(const IdxTensor& images, const IdxTensor& labels, Split split) : split_(split) {
        require(images.dims.size() == 3, errc::dimension_mismatch, "image file must be 3-d");
        require(labels.dims.size() == 1, errc::dimension_mismatch, "label file must be 1-d");
        require(images.dims[0] == labels.dims[0], errc::dimension_mismatch,
                std::to_string(images.dims[0]) + " images but " + std::to_string(labels.dims[0]) + " labels");
        count_ = images.dims[0];
        pixels_ = std::size_t{images.dims[1]} * images.dims[2];
        images_ = images.data;
        labels_ = labels.data;
    }

    Split split() const noexcept { return split_; }
    std::size_t size() const noexcept { return count_; }
    std::size_t pixels() const noexcept { return pixels_; }
    int label(std::size_t i) const { return labels_.at(i); }
    std::span<const std::uint8_t> image(std::size_t i) const { return {images_.data() + i * pixels_, pixels_}; }

    /// Rows in the given order, pixels scaled to [0, 1], digit as label.
    Batch to_batch(std::span<const std::size_t> rows, std::size_t num_classes = 10) const {
        std::vector<double> x;
        x.reserve(rows.size() * pixels_);
        std::vector<int> y;
        y.reserve(rows.size());
        for (std::size_t r : rows) {
            for (std::uint8_t v : image(r)) x.push_back(static_cast<double>(v) / 255.0);
            y.push_back(label(r));
        }
        return Batch::classification(pixels_, num_classes, std::move(x), std::move(y));
    }

private:
    Split split_;
    std::size_t count_ = 0;
    std::size_t pixels_ = 0;
    std::vector<std::uint8_t> images_;
    std::vector<std::uint8_t> labels_;
};

inline MnistCorpus load_mnist(const std::filesystem::path& dir, Split split, const MnistFileNames& names = {}) {
    const bool train = split == Split::train;
    const auto images = dir / (train ? names.train_images : names.test_images);
    const auto labels = dir / (train ? names.train_labels : names.test_labels);
    require(std::filesystem::exists(images) && std::filesystem::exists(labels), errc::missing_data,
            "MNIST files not found under " + dir.string());
    return MnistCorpus(read_idx_file(images), read_idx_file(labels), split);
}

/// `total` items over `parts` buckets, the first (total % parts) buckets one larger.
inline std::vector<std::size_t> split_evenly(std::size_t total, std::size_t parts) {
    require(parts >= 1, errc::invalid_argument, "cannot split over zero parts");
    std::vector<std::size_t> out(parts, total / parts);
    for (std::size_t i = 0; i < total % parts; ++i) ++out[i];
    return out;
}

struct ClassificationTask {
    std::vector<int> classes;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::uint64_t seed = 0;

    static ClassificationTask per_class(std::vector<int> classes, std::size_t train_per_class,
                                        std::size_t test_per_class, std::uint64_t seed) {
        const std::size_t n = classes.size();
        return {std::move(classes), train_per_class * n, test_per_class * n, seed};
    }
};

inline std::string describe_classes(const std::vector<int>& classes) {
    std::string s;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (i) s += '|';
        s += std::to_string(classes[i]);
    }
    return s;
}

/// Per class: shuffle that digit's corpus indices with the task seed, take
/// the first n_train for training and the next n_test for testing. Labels
/// stay the original digit so every task shares the same 10-way head.
inline TaskDataset build_classification_task(const MnistCorpus& corpus, const ClassificationTask& task) {
    require(!task.classes.empty(), errc::invalid_argument, "classification task needs at least one class");
    std::set<int> distinct(task.classes.begin(), task.classes.end());
    require(distinct.size() == task.classes.size(), errc::invalid_argument, "duplicate digit in class set");
    for (int c : task.classes) require(c >= 0 && c <= 9, errc::invalid_argument, "digit outside 0..9");

    const auto train_counts = split_evenly(task.train_size, task.classes.size());
    const auto test_counts = split_evenly(task.test_size, task.classes.size());
    Rng rng(task.seed);
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t k = 0; k < task.classes.size(); ++k) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < corpus.size(); ++i)
            if (corpus.label(i) == task.classes[k]) pool.push_back(i);
        require(pool.size() >= train_counts[k] + test_counts[k], errc::insufficient_samples,
                "digit " + std::to_string(task.classes[k]) + " has " + std::to_string(pool.size()) +
                    " samples, task needs " + std::to_string(train_counts[k] + test_counts[k]));
        std::shuffle(pool.begin(), pool.end(), rng);
        train_rows.insert(train_rows.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(train_counts[k]));
        test_rows.insert(test_rows.end(), pool.begin() + static_cast<std::ptrdiff_t>(train_counts[k]),
                         pool.begin() + static_cast<std::ptrdiff_t>(train_counts[k] + test_counts[k]));
    }
    require(!train_rows.empty() && !test_rows.empty(), errc::invalid_argument, "classification splits must be non-empty");
    return {corpus.to_batch(train_rows), corpus.to_batch(test_rows), describe_classes(task.classes)};
}

// --------------------------------------------------------- fine-tune tasks

enum class TaskKind { sinusoid, classification };

struct FinetuneSource {
    TaskKind kind = TaskKind::sinusoid;
    SinusoidSettings sinusoid;
    double min_amplitude = 0.1;
    double max_amplitude = 10.0;
    const MnistCorpus* corpus = nullptr;
    std::size_t ways = 5;
    std::size_t test_per_class = 20;
};

/// Fresh task for few-shot fine-tuning. Sinusoid: amplitude ~ U[min, max],
/// `shots` training points. Classification: `ways` distinct digits drawn
/// without replacement, `shots` training samples per digit.
inline TaskDataset sample_finetune_task(Rng& rng, const FinetuneSource& source, std::size_t shots) {
    require(shots >= 1, errc::invalid_argument, "shots must be >= 1");
    if (source.kind == TaskKind::sinusoid) {
        std::uniform_real_distribution<double> amp(source.min_amplitude, source.max_amplitude);
        SinusoidTask task;
        task.amplitude = amp(rng);
        task.phase = source.sinusoid.fixed_phase;
        if (source.sinusoid.phase_mode == PhaseMode::random) {
            std::uniform_real_distribution<double> ph(0.0, std::numbers::pi);
            task.phase = ph(rng);
        }
        task.x_min = source.sinusoid.x_min;
        task.x_max = source.sinusoid.x_max;
        task.train_size = shots;
        task.test_size = source.sinusoid.test_size;
        task.seed = rng();
        return sample_sinusoid(task);
    }
    require(source.corpus != nullptr, errc::missing_data, "classification fine-tuning needs an MNIST corpus");
    require(source.ways >= 1 && source.ways <= 10, errc::invalid_argument, "ways must be in 1..10");
    std::vector<int> digits(10);
    std::iota(digits.begin(), digits.end(), 0);
    std::shuffle(digits.begin(), digits.end(), rng);
    digits.resize(source.ways);
    std::sort(digits.begin(), digits.end());
    const auto task = ClassificationTask::per_class(digits, shots, source.test_per_class, rng());
    return build_classification_task(*source.corpus, task);
}

} // namespace fedmeta
