// permlearn command-line front end.
//
// Exit codes: 0 success, 1 runtime failure (or gradcheck FAIL), 2 usage or
// format error, 3 numerical divergence during training.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "permlearn/permlearn.hpp"

namespace fs = std::filesystem;
using namespace permlearn;

namespace {

/// Bad invocation or configuration detected by the CLI itself.
class UsageError : public Error {
public:
    using Error::Error;
};

struct ConfigArgs {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string run_dir;
    std::optional<std::size_t> workers;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args, bool with_run_dir) {
    cmd->add_option("-c,--config", args.config_file, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", args.overrides, "override one config key (key=value); repeatable")
        ->allow_extra_args(false);
    if (with_run_dir)
        cmd->add_option("--run", args.run_dir, "training output directory (reads config.txt and model.ckpt)")
            ->check(CLI::ExistingDirectory);
}

/// Layers: run directory config, config file, then --set overrides.
ConfigStore load_store(const ConfigArgs& args) {
    ConfigStore cs;
    if (!args.run_dir.empty()) cs.load_file(fs::path(args.run_dir) / "config.txt");
    if (!args.config_file.empty()) cs.load_file(args.config_file);
    for (const auto& o : args.overrides) cs.set_assignment(o);
    if (args.workers) cs.set("workers", std::to_string(*args.workers));
    return cs;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < n; ++k) {
        h ^= p[k];
        h *= 1099511628211ull;
    }
    return h;
}

constexpr std::uint64_t kFnvBasis = 1469598103934665603ull;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

fs::path manifest_path(const RunConfig& rc) { return rc.image_dir / "manifest.txt"; }

std::vector<Image> load_images(const RunConfig& rc) {
    if (rc.image_dir.empty()) throw UsageError("task=patches requires image_dir");
    if (!fs::is_directory(rc.image_dir)) throw UsageError("image directory does not exist: " + rc.image_dir.string());
    if (!fs::exists(manifest_path(rc)))
        throw UsageError("image directory has no manifest.txt: " + rc.image_dir.string());
    auto images = load_manifest_images(manifest_path(rc));
    for (const auto& img : images)
        if (img.channels != rc.channels)
            throw UsageError("image has " + std::to_string(img.channels) + " channels but config says " +
                             std::to_string(rc.channels));
    return images;
}

std::uint64_t shuffle_seed(const RunConfig& rc) { return rc.synth.seed ^ 0x9e3779b97f4a7c15ull; }

DatasetSplit build_split(const RunConfig& rc) {
    if (rc.task == TaskKind::synth) return make_synth_split(rc.synth, rc.heldout, shuffle_seed(rc));
    return make_patch_split(load_images(rc), rc.grid, rc.heldout_fraction, rc.subtract_mean, shuffle_seed(rc));
}

std::size_t procedural_size(const PatchGridSpec& g) {
    return g.grid * (g.jitter ? g.patch_px + g.patch_px / 4 : g.patch_px);
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const ConfigArgs& args, const std::string& out) {
    RunConfig rc = load_store(args).resolve();
    if (rc.task == TaskKind::synth) {
        const DatasetSplit split = make_synth_split(rc.synth, rc.heldout, shuffle_seed(rc));
        std::uint64_t h = kFnvBasis;
        for (const auto* set : {&split.train, &split.heldout})
            for (const auto& s : *set) {
                for (const auto& v : s.items) h = fnv1a(h, v.data(), v.size() * sizeof(double));
                h = fnv1a(h, s.perm.indices().data(), s.perm.size() * sizeof(std::size_t));
            }
        if (!out.empty()) {
            fs::create_directories(out);
            std::ofstream(fs::path(out) / "config.txt") << ConfigStore::render(rc);
        }
        std::cout << "task=synth sequences=" << split.train.size() << " heldout=" << split.heldout.size()
                  << " l=" << rc.synth.l << " d=" << rc.synth.d << " noise_sigma=" << format_number(rc.synth.noise_sigma)
                  << " seed=" << rc.synth.seed << " hash=" << hex64(h) << '\n';
        return 0;
    }

    if (!out.empty()) {
        // Materialize procedural images and a manifest.
        const fs::path dir(out);
        fs::create_directories(dir);
        Rng rng(rc.synth.seed);
        std::vector<std::string> names;
        const std::size_t size = procedural_size(rc.grid);
        for (std::size_t k = 0; k < rc.n_images; ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "img%05zu.%s", k, rc.channels == 3 ? "ppm" : "pgm");
            save_pixmap(procedural_image(size, rc.channels, rng), dir / name);
            names.emplace_back(name);
        }
        write_manifest(dir / "manifest.txt", names);
        rc.image_dir = dir;
    }
    const auto images = load_images(rc);
    std::uint64_t h = kFnvBasis;
    for (const auto& img : images) h = fnv1a(h, img.pixels.data(), img.pixels.size());
    const auto split = make_patch_split(images, rc.grid, rc.heldout_fraction, rc.subtract_mean, shuffle_seed(rc));
    std::cout << "task=patches images=" << images.size() << " train=" << split.train.size()
              << " heldout=" << split.heldout.size() << " grid=" << rc.grid.grid << " patch_px=" << rc.grid.patch_px
              << " seed=" << rc.synth.seed << " hash=" << hex64(h) << '\n';
    if (!out.empty()) std::cout << "manifest: " << manifest_path(rc).string() << '\n';
    return 0;
}

int cmd_train(const ConfigArgs& args, const std::string& out, bool force) {
    ConfigStore store = load_store(args);
    if (!out.empty()) store.set("out_dir", out);
    const RunConfig rc = store.resolve();
    const fs::path dir = rc.out_dir;
    if (fs::exists(dir) && !fs::is_empty(dir) && !force)
        throw UsageError("output directory " + dir.string() + " exists and is not empty (use --force to overwrite)");
    const DatasetSplit split = build_split(rc);
    fs::create_directories(dir);
    std::ofstream(dir / "config.txt") << ConfigStore::render(rc);

    std::cout << "iter,loss,kt,hs,ne" << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = train(split.train, split.heldout, rc.dims(), rc.train, [](const LogEntry& e) {
        std::cout << e.iteration << ',' << format_number(e.loss) << ',' << format_number(e.kt) << ','
                  << format_number(e.hs) << ',' << format_number(e.ne) << std::endl;
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream log(dir / "metrics.csv", std::ios::trunc);
    write_metrics_log(log, r.log);
    save_checkpoint(r.params, dir / "model.ckpt");
    std::cerr << "trained " << rc.train.iterations << " steps in " << format_number(secs) << " s; wrote "
              << (dir / "model.ckpt").string() << '\n';
    return 0;
}

ModelParams load_model(const ConfigArgs& args, const std::string& checkpoint, const RunConfig& rc) {
    fs::path path = checkpoint;
    if (path.empty()) {
        if (args.run_dir.empty()) throw UsageError("need --checkpoint or --run");
        path = fs::path(args.run_dir) / "model.ckpt";
    }
    ModelParams p = load_checkpoint(path);
    if (!(p.dims == rc.dims()))
        throw UsageError("checkpoint dimensions do not match the configuration (d, h, h2, l)");
    return p;
}

int cmd_eval(const ConfigArgs& args, const std::string& checkpoint, const std::string& predictor,
             std::optional<std::size_t> samples, const std::string& out) {
    ConfigStore store = load_store(args);
    if (samples && predictor == "model") store.set("heldout", std::to_string(*samples));
    const RunConfig rc = store.resolve();

    EvalMetrics m;
    if (predictor == "model") {
        const ModelParams params = load_model(args, checkpoint, rc);
        const DatasetSplit split = build_split(rc);
        m = evaluate(params, split.heldout, rc.train.sinkhorn, rc.train.loss_kind);
    } else {
        // Baselines only need ground-truth shuffles of the configured length.
        const std::size_t l = rc.dims().l;
        const std::size_t n = samples.value_or(rc.heldout);
        Rng truth_rng(shuffle_seed(rc)), pred_rng(rc.train.seed);
        for (std::size_t k = 0; k < n; ++k) {
            const Permutation truth = sample_permutation(l, truth_rng);
            const Permutation pred = predictor == "oracle" ? truth : sample_permutation(l, pred_rng);
            m.kt += kendall_tau(pred, truth);
            m.hs += hamming_similarity(pred, truth);
            m.ne += normalization_error(pred.matrix());
            ++m.count;
        }
        if (m.count) {
            m.kt /= double(m.count);
            m.hs /= double(m.count);
            m.ne /= double(m.count);
        }
    }
    std::ostringstream csv;
    csv << "predictor,samples,kt,hs,ne\n"
        << predictor << ',' << m.count << ',' << format_number(m.kt) << ',' << format_number(m.hs) << ','
        << format_number(m.ne) << '\n';
    std::cout << csv.str();
    if (!out.empty()) std::ofstream(out, std::ios::trunc) << csv.str();
    return 0;
}

Permutation parse_permutation(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::size_t> pi;
    std::string tok;
    while (in >> tok) {
        std::size_t v = 0;
        const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size()) throw UsageError("bad permutation entry '" + tok + "'");
        pi.push_back(v);
    }
    return Permutation(std::move(pi));
}

int cmd_unshuffle(const ConfigArgs& args, const std::string& checkpoint, const std::string& image_path,
                  const std::string& out, std::optional<std::uint64_t> shuffle, const std::string& truth) {
    ConfigStore store = load_store(args);
    store.set("task", "patches");
    const RunConfig rc = store.resolve();
    const Image img = load_pixmap(image_path);
    if (img.channels != rc.channels)
        throw UsageError("image has " + std::to_string(img.channels) + " channels but config says " +
                         std::to_string(rc.channels));
    auto patches = grid_split(img, rc.grid);
    std::optional<Permutation> applied;
    if (shuffle) {
        Rng rng(*shuffle);
        applied = sample_permutation(patches.size(), rng);
        patches = apply_permutation(*applied, patches);
        std::cout << "shuffle=" << applied->to_string() << '\n';
    }

    Permutation pi;
    if (!truth.empty()) {
        pi = parse_permutation(truth);
        if (pi.size() != patches.size())
            throw UsageError("--truth has " + std::to_string(pi.size()) + " entries, expected " +
                             std::to_string(patches.size()));
    } else {
        const ModelParams params = load_model(args, checkpoint, rc);
        std::vector<FeatureVector> feats;
        for (const auto& p : patches) feats.push_back(patch_features(p, rc.subtract_mean));
        pi = predict(params, feats, rc.train.sinkhorn, head_for(rc.train.loss_kind)).perm;
    }
    save_pixmap(reassemble(patches, pi), out);
    std::cout << "pi=" << pi.to_string() << '\n';
    if (applied) std::cout << "kt=" << format_number(kendall_tau(pi, *applied)) << '\n';
    return 0;
}

ModelParams gradcheck_params(const ModelDims& dims, Rng& rng) {
    ModelParams p = ModelParams::he_normal(dims, rng);
    std::normal_distribution<double> n(0.0, 0.1);
    for (auto* b : {&p.encoder_b, &p.head_b, &p.score_b})
        for (double& v : *b) v = n(rng);
    return p;
}

struct GradcheckArgs {
    ModelDims dims{4, 5, 6, 3};
    std::uint64_t seed = 1;
    std::string loss = "both";
    std::string fault = "none";
    double tolerance = 1e-4;
    double weight_decay = 1e-4;
    std::size_t sinkhorn_iterations = 5;
    std::size_t max_per_tensor = 0;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    a.dims.validate();
    std::vector<LossKind> kinds;
    if (a.loss == "both") kinds = {LossKind::sinkhorn_ce, LossKind::naive_sigmoid_ce};
    else kinds = {parse_loss_kind(a.loss)};
    Rng rng(a.seed);
    const ModelParams params = gradcheck_params(a.dims, rng);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<FeatureVector> items(a.dims.l, FeatureVector(a.dims.d));
    for (auto& v : items)
        for (double& x : v) x = n(rng);
    const Permutation target = a.dims.l >= 2 ? sample_permutation(a.dims.l, rng) : Permutation::identity(1);
    SinkhornConfig cfg;
    cfg.iterations = a.sinkhorn_iterations;

    GradCheckOptions opt;
    opt.weight_decay = a.weight_decay;
    opt.flip_sign = a.fault == "sign-flip";
    opt.max_per_tensor = a.max_per_tensor;

    double worst = 0.0;
    std::cout << "loss,tensor,checked,worst_index,analytic,numeric,rel_error\n";
    for (LossKind kind : kinds) {
        const GradCheckReport r = check_model_gradients(params, items, target, cfg, kind, opt);
        for (const auto& t : r.tensors)
            std::cout << to_string(kind) << ',' << t.name << ',' << t.checked << ',' << t.worst_index << ','
                      << format_number(t.analytic) << ',' << format_number(t.numeric) << ','
                      << format_number(t.max_rel_error) << '\n';
        worst = std::max(worst, r.max_rel_error);
    }
    const bool pass = worst < a.tolerance;
    std::cout << "max_rel_error=" << format_number(worst) << " tolerance=" << format_number(a.tolerance) << ' '
              << (pass ? "PASS" : "FAIL") << '\n';
    return pass ? 0 : 1;
}

Matrix read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open matrix file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0, last_line = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<double> row;
        std::string tok;
        while (ls >> tok) {
            double v = 0;
            const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || p != tok.data() + tok.size())
                throw FormatError::at_line("matrix: cannot parse '" + tok + "'", line_no);
            row.push_back(v);
        }
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError::at_line("matrix: row has " + std::to_string(row.size()) + " entries, expected " +
                                           std::to_string(rows.front().size()),
                                       line_no);
        rows.push_back(std::move(row));
        last_line = line_no;
    }
    if (rows.empty()) throw FormatError::at_line("matrix: no rows", line_no);
    if (rows.size() != rows.front().size())
        throw FormatError::at_line("matrix: " + std::to_string(rows.size()) + " rows but " +
                                       std::to_string(rows.front().size()) + " columns",
                                   last_line);
    const std::size_t l = rows.size();
    Matrix m(l, l);
    for (std::size_t i = 0; i < l; ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    return m;
}

int cmd_round(const std::string& path, bool brute_force) {
    const Matrix q = read_matrix_file(path);
    const AssignmentResult r = brute_force ? brute_force_round_frobenius(q) : round_to_permutation(q);
    std::cout << "pi=" << r.perm.to_string() << '\n' << "objective=" << format_number(r.objective) << '\n';
    return 0;
}

int cmd_bench(std::size_t max_l, std::size_t reps, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    using clock = std::chrono::steady_clock;
    auto us = [](clock::duration d) { return std::chrono::duration<double, std::micro>(d).count(); };
    std::cout << "l,sinkhorn_forward_us,sinkhorn_backward_us,round_us\n";
    for (std::size_t l = 4; l <= max_l; l *= 2) {
        Matrix q0(l, l);
        for (double& v : q0.values()) v = u(rng);
        Matrix g(l, l);
        for (double& v : g.values()) v = u(rng);
        const SinkhornConfig cfg;
        double fwd = 0, bwd = 0, rnd = 0;
        for (std::size_t k = 0; k < reps; ++k) {
            auto t0 = clock::now();
            const auto [q, tape] = sinkhorn_forward(q0, cfg);
            auto t1 = clock::now();
            const Matrix gi = sinkhorn_backward(g, tape);
            auto t2 = clock::now();
            const auto r = round_to_permutation(q);
            auto t3 = clock::now();
            fwd += us(t1 - t0);
            bwd += us(t2 - t1);
            rnd += us(t3 - t2);
            if (r.objective < 0 || gi.size() != l * l) return 1;
        }
        const double n = static_cast<double>(reps);
        std::cout << l << ',' << format_number(fwd / n) << ',' << format_number(bwd / n) << ','
                  << format_number(rnd / n) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Permutation learning with Sinkhorn networks"};
    app.require_subcommand(1);

    ConfigArgs cfg;

    auto* gen = app.add_subcommand("gen-data", "generate or validate a dataset and print a summary");
    std::string gen_out;
    add_config_options(gen, cfg, false);
    gen->add_option("-o,--out", gen_out, "write procedural images (patch task) or the resolved spec here");

    auto* tr = app.add_subcommand("train", "train a model; writes config.txt, metrics.csv and model.ckpt");
    std::string train_out;
    bool force = false;
    add_config_options(tr, cfg, false);
    tr->add_option("-o,--out", train_out, "output directory (overrides out_dir)");
    tr->add_flag("-f,--force", force, "overwrite a non-empty output directory");
    tr->add_option("-w,--workers", cfg.workers, "threads for per-sample gradients (result is unchanged)")
        ->check(CLI::PositiveNumber);

    auto* ev = app.add_subcommand("eval", "report KT, HS and NE on held-out data as CSV");
    std::string ev_ckpt, ev_predictor = "model", ev_out;
    std::optional<std::size_t> ev_samples;
    add_config_options(ev, cfg, true);
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->check(CLI::ExistingFile);
    ev->add_option("-p,--predictor", ev_predictor, "model, oracle or random")
        ->check(CLI::IsMember({"model", "oracle", "random"}));
    ev->add_option("-n,--samples", ev_samples, "number of evaluation samples")->check(CLI::PositiveNumber);
    ev->add_option("-o,--out", ev_out, "also write the CSV table here");

    auto* un = app.add_subcommand("unshuffle", "predict the patch order of an image and reassemble it");
    std::string un_ckpt, un_image, un_out, un_truth;
    std::optional<std::uint64_t> un_shuffle;
    add_config_options(un, cfg, true);
    un->add_option("--checkpoint", un_ckpt, "model checkpoint")->check(CLI::ExistingFile);
    un->add_option("-i,--image", un_image, "input image (P5/P6)")->required()->check(CLI::ExistingFile);
    un->add_option("-o,--out", un_out, "output image path")->required();
    un->add_option("--shuffle-seed", un_shuffle, "shuffle the patches with a random permutation first");
    un->add_option("--truth", un_truth, "use this permutation (space separated) instead of the model");

    auto* gc = app.add_subcommand("gradcheck", "compare analytic gradients with central finite differences");
    GradcheckArgs ga;
    gc->add_option("--d", ga.dims.d, "item dimension")->capture_default_str();
    gc->add_option("--hidden", ga.dims.h, "encoder width")->capture_default_str();
    gc->add_option("--hidden2", ga.dims.h2, "head width")->capture_default_str();
    gc->add_option("--l", ga.dims.l, "sequence length")->capture_default_str();
    gc->add_option("--seed", ga.seed, "random seed")->capture_default_str();
    gc->add_option("--loss", ga.loss, "sinkhorn_ce, naive_sigmoid_ce or both")
        ->check(CLI::IsMember({"both", "sinkhorn_ce", "sinkhorn", "naive_sigmoid_ce", "naive"}))
        ->capture_default_str();
    gc->add_option("--fault", ga.fault, "inject a fault into the analytic gradient (none, sign-flip)")
        ->check(CLI::IsMember({"none", "sign-flip"}))
        ->capture_default_str();
    gc->add_option("--tolerance", ga.tolerance, "maximum relative error")->capture_default_str();
    gc->add_option("--weight-decay", ga.weight_decay, "weight decay coefficient")->capture_default_str();
    gc->add_option("--sinkhorn-iterations", ga.sinkhorn_iterations, "unrolled iterations")->capture_default_str();
    gc->add_option("--max-per-tensor", ga.max_per_tensor, "check at most this many coordinates per tensor (0 = all)")
        ->capture_default_str();

    auto* rd = app.add_subcommand("round", "round a matrix file to the nearest permutation");
    std::string rd_file;
    bool rd_brute = false;
    rd->add_option("matrix", rd_file, "whitespace-separated rows")->required()->check(CLI::ExistingFile);
    rd->add_flag("--brute-force", rd_brute, "enumerate all permutations instead (l <= 9)");

    auto* bn = app.add_subcommand("bench", "time Sinkhorn forward/backward and rounding");
    std::size_t bn_max_l = 64, bn_reps = 20;
    std::uint64_t bn_seed = 1;
    bn->add_option("--max-l", bn_max_l, "largest size (doubling from 4)")->capture_default_str();
    bn->add_option("--reps", bn_reps, "repetitions per size")->check(CLI::PositiveNumber)->capture_default_str();
    bn->add_option("--seed", bn_seed, "random seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) return cmd_gen_data(cfg, gen_out);
        if (*tr) return cmd_train(cfg, train_out, force);
        if (*ev) return cmd_eval(cfg, ev_ckpt, ev_predictor, ev_samples, ev_out);
        if (*un) return cmd_unshuffle(cfg, un_ckpt, un_image, un_out, un_shuffle, un_truth);
        if (*gc) return cmd_gradcheck(ga);
        if (*rd) return cmd_round(rd_file, rd_brute);
        if (*bn) return cmd_bench(bn_max_l, bn_reps, bn_seed);
    } catch (const TrainingDivergenceError& e) {
        std::cerr << "error: training diverged: " << e.what() << '\n';
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const SizeLimitError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
