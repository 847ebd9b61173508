#pragma once

// Flat `key = value` run configuration. Lines starting with '#' and blank
// lines are ignored; unknown keys, duplicate keys and malformed values are
// errors.
//
//   experiment = sinusoid
//   algorithm = meta_backward
//   backward.rounds = 50
//   sinusoid.amplitudes = 2,6,10
//   mnist.tasks = 0,1,2;7,8,9

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedmeta/cost_model.hpp"
#include "fedmeta/error.hpp"
#include "fedmeta/evaluation.hpp"
#include "fedmeta/imaml.hpp"
#include "fedmeta/meta_backward.hpp"
#include "fedmeta/tasks.hpp"

namespace fedmeta {

enum class ExperimentKind { sinusoid, mnist };
enum class Algorithm { meta_backward, imaml, avg_init, random_init };

inline constexpr Algorithm all_algorithms[] = {Algorithm::meta_backward, Algorithm::imaml, Algorithm::avg_init,
                                               Algorithm::random_init};

inline std::string to_string(ExperimentKind k) { return k == ExperimentKind::sinusoid ? "sinusoid" : "mnist"; }

inline std::string to_string(Algorithm a) {
    switch (a) {
    case Algorithm::meta_backward: return "meta_backward";
    case Algorithm::imaml: return "imaml";
    case Algorithm::avg_init: return "avg_init";
    case Algorithm::random_init: return "random_init";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
    for (auto a : all_algorithms)
        if (to_string(a) == s) return a;
    fail(errc::invalid_config, "unknown algorithm '" + std::string(s) + "'");
}

inline ExperimentKind parse_experiment(std::string_view s) {
    if (s == "sinusoid") return ExperimentKind::sinusoid;
    if (s == "mnist") return ExperimentKind::mnist;
    fail(errc::invalid_config, "unknown experiment '" + std::string(s) + "'");
}

inline FinetuneSettings finetune_defaults(ExperimentKind kind) {
    if (kind == ExperimentKind::sinusoid) return {40, 32, 0.01, 1000};
    return {10, 100, 0.1, 1000};
}

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::sinusoid;
    Algorithm algorithm = Algorithm::meta_backward;
    /// Unset means 500 for sinusoid and 100 for mnist.
    std::optional<std::size_t> trials;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";
    std::filesystem::path data_dir = "data/mnist";

    /// Explicit fine-tune settings; unset fields follow the experiment's defaults.
    struct {
        std::optional<std::size_t> shots, steps, batch_size;
        std::optional<double> lr;
    } finetune_overrides;

    SinusoidSettings sinusoid;
    std::vector<double> amplitudes{2.0, 6.0, 10.0};
    double finetune_min_amplitude = 0.1;
    double finetune_max_amplitude = 10.0;

    std::vector<std::vector<int>> mnist_tasks{{0, 1, 2}, {7, 8, 9}};
    std::size_t mnist_train_size = 400;
    std::size_t mnist_test_size = 100;
    std::size_t finetune_ways = 5;
    std::size_t finetune_test_per_class = 20;

    BackwardConfig backward;
    ImamlConfig imaml;
    CostSettings costs;

    std::size_t trial_count() const {
        return trials.value_or(experiment == ExperimentKind::sinusoid ? 500 : 100);
    }
    FinetuneSettings finetune() const {
        auto ft = finetune_defaults(experiment);
        ft.shots = finetune_overrides.shots.value_or(ft.shots);
        ft.steps = finetune_overrides.steps.value_or(ft.steps);
        ft.batch_size = finetune_overrides.batch_size.value_or(ft.batch_size);
        ft.lr = finetune_overrides.lr.value_or(ft.lr);
        return ft;
    }

    MlpSpec model() const {
        if (experiment == ExperimentKind::sinusoid) return {{1, 40, 40, 1}, Activation::relu, Head::identity_mse};
        return {{784, 8, 8, 10}, Activation::relu, Head::softmax_cross_entropy};
    }

    void validate() const {
        require(trial_count() >= 1, errc::invalid_config, "trials must be >= 1");
        const auto ft = finetune();
        require(ft.shots >= 1 && ft.batch_size >= 1 && ft.lr > 0.0, errc::invalid_config,
                "finetune shots/batch_size must be >= 1 and lr positive");
        require(!amplitudes.empty(), errc::invalid_config, "sinusoid.amplitudes is empty");
        require(finetune_min_amplitude <= finetune_max_amplitude, errc::invalid_config,
                "finetune amplitude range is reversed");
        require(sinusoid.x_min < sinusoid.x_max, errc::invalid_config, "sinusoid x range is empty");
        require(!mnist_tasks.empty(), errc::invalid_config, "mnist.tasks is empty");
        require(finetune_ways >= 1 && finetune_ways <= 10, errc::invalid_config, "finetune.ways must be in 1..10");
        backward.validate();
        imaml.validate();
        costs.channel.validate();
        require(costs.device_watts > 0.0, errc::invalid_config, "energy.device_watts must be positive");
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    require(ec == std::errc{} && ptr == end, errc::invalid_config,
            "bad value for " + std::string(key) + ": '" + std::string(text) + "'");
    return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    fail(errc::invalid_config, "bad boolean for " + std::string(key) + ": '" + std::string(text) + "'");
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
    std::vector<T> out;
    for (auto item : split(text, ',')) out.push_back(parse_number<T>(key, item));
    return out;
}

} // namespace detail

/// Applies one key to `cfg`. Throws InvalidConfig for unknown keys or bad values.
inline void apply_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    using namespace detail;
    auto size = [&] { return parse_number<std::size_t>(key, value); };
    auto real = [&] { return parse_number<double>(key, value); };

    if (key == "experiment") cfg.experiment = parse_experiment(value);
    else if (key == "algorithm") cfg.algorithm = parse_algorithm(value);
    else if (key == "trials") cfg.trials = size();
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "output_dir") cfg.output_dir = std::string(value);
    else if (key == "data_dir") cfg.data_dir = std::string(value);
    else if (key == "finetune.shots") cfg.finetune_overrides.shots = size();
    else if (key == "finetune.steps") cfg.finetune_overrides.steps = size();
    else if (key == "finetune.lr") cfg.finetune_overrides.lr = real();
    else if (key == "finetune.batch_size") cfg.finetune_overrides.batch_size = size();
    else if (key == "finetune.ways") cfg.finetune_ways = size();
    else if (key == "finetune.test_per_class") cfg.finetune_test_per_class = size();
    else if (key == "finetune.min_amplitude") cfg.finetune_min_amplitude = real();
    else if (key == "finetune.max_amplitude") cfg.finetune_max_amplitude = real();
    else if (key == "sinusoid.amplitudes") cfg.amplitudes = parse_list<double>(key, value);
    else if (key == "sinusoid.x_min") cfg.sinusoid.x_min = real();
    else if (key == "sinusoid.x_max") cfg.sinusoid.x_max = real();
    else if (key == "sinusoid.train_size") cfg.sinusoid.train_size = size();
    else if (key == "sinusoid.test_size") cfg.sinusoid.test_size = size();
    else if (key == "sinusoid.phase") {
        if (value == "random") cfg.sinusoid.phase_mode = PhaseMode::random;
        else {
            cfg.sinusoid.phase_mode = PhaseMode::fixed;
            cfg.sinusoid.fixed_phase = real();
        }
    } else if (key == "mnist.tasks") {
        cfg.mnist_tasks.clear();
        for (auto group : split(value, ';')) cfg.mnist_tasks.push_back(parse_list<int>(key, group));
    } else if (key == "mnist.train_size") cfg.mnist_train_size = size();
    else if (key == "mnist.test_size") cfg.mnist_test_size = size();
    else if (key == "backward.rounds") cfg.backward.rounds = size();
    else if (key == "backward.alpha") cfg.backward.alpha = real();
    else if (key == "backward.gamma") cfg.backward.gamma = real();
    else if (key == "backward.delta_max") cfg.backward.delta_max = real();
    else if (key == "backward.delta_schedule") cfg.backward.delta_schedule = parse_list<double>(key, value);
    else if (key == "backward.batch_size") cfg.backward.batch_size = size();
    else if (key == "backward.full_batch") cfg.backward.full_batch = parse_bool(key, value);
    else if (key == "backward.local_steps") cfg.backward.local.steps = size();
    else if (key == "backward.local_lr") cfg.backward.local.lr = real();
    else if (key == "backward.local_grad_tol") cfg.backward.local.grad_tol = real();
    else if (key == "backward.local_batch_size") cfg.backward.local.batch_size = size();
    else if (key == "imaml.X") cfg.imaml.outer_steps = size();
    else if (key == "imaml.Y") cfg.imaml.inner_steps = size();
    else if (key == "imaml.cg_steps") cfg.imaml.cg_steps = size();
    else if (key == "imaml.lambda") cfg.imaml.lambda = real();
    else if (key == "imaml.inner_lr") cfg.imaml.inner_lr = real();
    else if (key == "imaml.outer_lr") cfg.imaml.outer_lr = real();
    else if (key == "imaml.batch_size") cfg.imaml.batch_size = size();
    else if (key == "channel.bandwidth_hz") cfg.costs.channel.bandwidth_hz = real();
    else if (key == "channel.tx_power_w") cfg.costs.channel.tx_power_w = real();
    else if (key == "channel.noise_psd") cfg.costs.channel.noise_psd = real();
    else if (key == "channel.bits_per_element") cfg.costs.channel.bits_per_element = parse_number<std::uint32_t>(key, value);
    else if (key == "channel.broadcast") {
        if (value == "per_agent") cfg.costs.channel.broadcast = BroadcastAccounting::per_agent;
        else if (value == "single") cfg.costs.channel.broadcast = BroadcastAccounting::single;
        else fail(errc::invalid_config, "channel.broadcast must be per_agent or single");
    } else if (key == "energy.device_watts") cfg.costs.device_watts = real();
    else fail(errc::invalid_config, "unknown config key '" + std::string(key) + "'");
}

inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t, std::less<>> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        require(eq != std::string_view::npos, errc::invalid_config,
                "line " + std::to_string(line_no) + ": expected key = value");
        const auto key = detail::trim(text.substr(0, eq));
        const auto value = detail::trim(text.substr(eq + 1));
        require(!key.empty(), errc::invalid_config, "line " + std::to_string(line_no) + ": empty key");
        const auto [it, fresh] = seen.emplace(std::string(key), line_no);
        require(fresh, errc::invalid_config,
                "line " + std::to_string(line_no) + ": '" + std::string(key) + "' already set on line " +
                    std::to_string(it->second));
        try {
            apply_config_value(cfg, key, value);
        } catch (const error& e) {
            fail(e.code(), "line " + std::to_string(line_no) + ": " + e.message());
        }
    }
    return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text, ExperimentConfig cfg = {}) {
    std::istringstream in(text);
    return parse_config(in, std::move(cfg));
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig cfg = {}) {
    std::ifstream in(path);
    require(static_cast<bool>(in), errc::io_error, "cannot open config " + path.string());
    return parse_config(in, std::move(cfg));
}

} // namespace fedmeta
