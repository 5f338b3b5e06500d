#pragma once

// key=value run configuration. Layers: built-in defaults, then a config file,
// then command-line overrides. Unknown keys are rejected.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/image.hpp"
#include "permlearn/model.hpp"
#include "permlearn/synthetic.hpp"
#include "permlearn/train.hpp"

namespace permlearn {

enum class TaskKind { synth, patches };

struct RunConfig {
    TaskKind task = TaskKind::synth;
    SynthSpec synth;
    std::size_t heldout = 500;

    PatchGridSpec grid;
    /// Directory holding manifest.txt (patch task).
    std::filesystem::path image_dir;
    std::size_t channels = 1;
    std::size_t n_images = 240;  // procedural images written by gen-data
    double heldout_fraction = 0.2;
    bool subtract_mean = true;

    std::size_t hidden = 32;
    std::size_t hidden2 = 64;
    TrainConfig train;

    std::filesystem::path out_dir = "run";

    ModelDims dims() const {
        if (task == TaskKind::synth) return {synth.d, hidden, hidden2, synth.l};
        return {grid.patch_px * grid.patch_px * channels, hidden, hidden2, grid.sequence_length()};
    }
};

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T v{};
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end)
        throw InvalidArgumentError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
    return v;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
    if (text == "0" || text == "false" || text == "off" || text == "no") return false;
    throw InvalidArgumentError("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(text) +
                               "'");
}

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

}  // namespace detail

/// Ordered key=value store with the set of recognised keys.
class ConfigStore {
public:
    static const std::vector<std::string>& known_keys() {
        static const std::vector<std::string> keys = {
            "task",          "l",          "d",           "n_sequences",  "heldout",          "noise_sigma",
            "data_seed",     "grid",       "patch_px",    "jitter",       "image_dir",        "channels",
            "n_images",      "heldout_fraction", "subtract_mean", "hidden", "hidden2",        "learning_rate",
            "momentum",      "batch_size", "iterations",  "weight_decay", "seed",             "loss",
            "sinkhorn_iterations", "epsilon", "clamp",    "eval_every",   "workers",          "out_dir"};
        return keys;
    }

    static bool is_known(std::string_view key) {
        for (const auto& k : known_keys())
            if (k == key) return true;
        return false;
    }

    /// Sets `key` (must be a known key).
    void set(const std::string& key, const std::string& value) {
        if (!is_known(key)) throw InvalidArgumentError("unknown config key '" + key + "'");
        values_[key] = value;
    }

    /// Parses "key=value"; used for command-line overrides.
    void set_assignment(std::string_view assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos)
            throw InvalidArgumentError("expected key=value, got '" + std::string(assignment) + "'");
        set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
    }

    /// Reads a config file: one key=value per line, '#' starts a comment.
    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open config file: " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string t = detail::trim(line);
            if (t.empty()) continue;
            try {
                set_assignment(t);
            } catch (const InvalidArgumentError& e) {
                throw FormatError::at_line(std::string(e.what()) + " in " + path.string(), line_no);
            }
        }
    }

    const std::map<std::string, std::string>& values() const { return values_; }

    /// Resolves into a typed RunConfig on top of the built-in defaults.
    RunConfig resolve() const {
        RunConfig rc;
        for (const auto& [key, v] : values_) apply(rc, key, v);
        rc.synth.validate();
        rc.grid.validate();
        rc.train.validate();
        rc.dims().validate();
        if (rc.channels != 1 && rc.channels != 3) throw InvalidArgumentError("channels must be 1 or 3");
        if (!(rc.heldout_fraction > 0.0 && rc.heldout_fraction < 1.0))
            throw InvalidArgumentError("heldout_fraction must lie in (0, 1)");
        return rc;
    }

    /// Every key with its resolved value, one key=value per line.
    static std::string render(const RunConfig& rc) {
        std::ostringstream os;
        auto num = [](double v) { return format_number(v); };
        os << "task=" << (rc.task == TaskKind::synth ? "synth" : "patches") << '\n'
           << "l=" << rc.synth.l << '\n'
           << "d=" << rc.synth.d << '\n'
           << "n_sequences=" << rc.synth.n_sequences << '\n'
           << "heldout=" << rc.heldout << '\n'
           << "noise_sigma=" << num(rc.synth.noise_sigma) << '\n'
           << "data_seed=" << rc.synth.seed << '\n'
           << "grid=" << rc.grid.grid << '\n'
           << "patch_px=" << rc.grid.patch_px << '\n'
           << "jitter=" << (rc.grid.jitter ? "true" : "false") << '\n'
           << "image_dir=" << rc.image_dir.string() << '\n'
           << "channels=" << rc.channels << '\n'
           << "n_images=" << rc.n_images << '\n'
           << "heldout_fraction=" << num(rc.heldout_fraction) << '\n'
           << "subtract_mean=" << (rc.subtract_mean ? "true" : "false") << '\n'
           << "hidden=" << rc.hidden << '\n'
           << "hidden2=" << rc.hidden2 << '\n'
           << "learning_rate=" << num(rc.train.learning_rate) << '\n'
           << "momentum=" << num(rc.train.momentum) << '\n'
           << "batch_size=" << rc.train.batch_size << '\n'
           << "iterations=" << rc.train.iterations << '\n'
           << "weight_decay=" << num(rc.train.weight_decay) << '\n'
           << "seed=" << rc.train.seed << '\n'
           << "loss=" << to_string(rc.train.loss_kind) << '\n'
           << "sinkhorn_iterations=" << rc.train.sinkhorn.iterations << '\n'
           << "epsilon=" << num(rc.train.sinkhorn.epsilon) << '\n'
           << "clamp=" << num(rc.train.sinkhorn.clamp) << '\n'
           << "eval_every=" << rc.train.eval_every << '\n'
           << "workers=" << rc.train.workers << '\n'
           << "out_dir=" << rc.out_dir.string() << '\n';
        return os.str();
    }

private:
    static void apply(RunConfig& rc, const std::string& key, const std::string& v) {
        using detail::parse_bool;
        using detail::parse_number;
        using sz = std::size_t;
        if (key == "task") {
            if (v == "synth") rc.task = TaskKind::synth;
            else if (v == "patches") rc.task = TaskKind::patches;
            else throw InvalidArgumentError("task must be 'synth' or 'patches', got '" + v + "'");
        } else if (key == "l") rc.synth.l = parse_number<sz>(key, v);
        else if (key == "d") rc.synth.d = parse_number<sz>(key, v);
        else if (key == "n_sequences") rc.synth.n_sequences = parse_number<sz>(key, v);
        else if (key == "heldout") rc.heldout = parse_number<sz>(key, v);
        else if (key == "noise_sigma") rc.synth.noise_sigma = parse_number<double>(key, v);
        else if (key == "data_seed") rc.synth.seed = parse_number<std::uint64_t>(key, v);
        else if (key == "grid") rc.grid.grid = parse_number<sz>(key, v);
        else if (key == "patch_px") rc.grid.patch_px = parse_number<sz>(key, v);
        else if (key == "jitter") rc.grid.jitter = parse_bool(key, v);
        else if (key == "image_dir") rc.image_dir = v;
        else if (key == "channels") rc.channels = parse_number<sz>(key, v);
        else if (key == "n_images") rc.n_images = parse_number<sz>(key, v);
        else if (key == "heldout_fraction") rc.heldout_fraction = parse_number<double>(key, v);
        else if (key == "subtract_mean") rc.subtract_mean = parse_bool(key, v);
        else if (key == "hidden") rc.hidden = parse_number<sz>(key, v);
        else if (key == "hidden2") rc.hidden2 = parse_number<sz>(key, v);
        else if (key == "learning_rate") rc.train.learning_rate = parse_number<double>(key, v);
        else if (key == "momentum") rc.train.momentum = parse_number<double>(key, v);
        else if (key == "batch_size") rc.train.batch_size = parse_number<sz>(key, v);
        else if (key == "iterations") rc.train.iterations = parse_number<sz>(key, v);
        else if (key == "weight_decay") rc.train.weight_decay = parse_number<double>(key, v);
        else if (key == "seed") rc.train.seed = parse_number<std::uint64_t>(key, v);
        else if (key == "loss") rc.train.loss_kind = parse_loss_kind(v);
        else if (key == "sinkhorn_iterations") rc.train.sinkhorn.iterations = parse_number<sz>(key, v);
        else if (key == "epsilon") rc.train.sinkhorn.epsilon = parse_number<double>(key, v);
        else if (key == "clamp") rc.train.sinkhorn.clamp = parse_number<double>(key, v);
        else if (key == "eval_every") rc.train.eval_every = parse_number<sz>(key, v);
        else if (key == "workers") rc.train.workers = parse_number<sz>(key, v);
        else if (key == "out_dir") rc.out_dir = v;
        else throw InvalidArgumentError("unknown config key '" + key + "'");
    }

    std::map<std::string, std::string> values_;
};

}  // namespace permlearn
