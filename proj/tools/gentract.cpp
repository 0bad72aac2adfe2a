#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gentract/config/config.hpp"
#include "gentract/data/dataset.hpp"
#include "gentract/enc/train_vae.hpp"
#include "gentract/eval/metrics.hpp"
#include "gentract/eval/report.hpp"
#include "gentract/gen/generate.hpp"
#include "gentract/gen/train.hpp"
#include "gentract/persist.hpp"
#include "gentract/sh/phantom.hpp"
#include "gentract/tract/trk.hpp"

namespace fs = std::filesystem;
using namespace gentract;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_exists(const std::string& path, const char* what) {
    if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

enc::EncoderConfig encoder_config(const cfg::RunConfig& c) {
    enc::EncoderConfig e;
    e.enc_ch1 = c.enc_ch1;
    e.enc_ch2 = c.enc_ch2;
    e.c_z = c.c_z;
    e.c_c = c.c_c;
    e.beta = c.beta;
    e.vae_lr = c.vae_lr;
    e.vae_steps = c.vae_steps;
    e.vae_batch = c.vae_batch;
    return e;
}

std::vector<std::pair<sh::SHVolume, tract::Tractogram>> load_pairs(const cfg::RunConfig& c) {
    if (c.volumes.empty() || c.volumes.size() != c.tractograms.size())
        throw UsageError("[data]: volumes and tractograms must be nonempty lists of equal length");
    std::vector<std::pair<sh::SHVolume, tract::Tractogram>> pairs;
    for (std::size_t i = 0; i < c.volumes.size(); ++i) {
        require_exists(c.volumes[i], "volume");
        require_exists(c.tractograms[i], "tractogram");
        pairs.emplace_back(sh::read_shv(c.volumes[i]), tract::read_trk(c.tractograms[i]));
    }
    return pairs;
}

data::AugmentSpec augment_spec(const cfg::RunConfig& c) {
    data::AugmentSpec a;
    a.rotations_deg = c.augment_rotations_deg;
    for (char axis : c.augment_axes) a.axes.push_back(axis);
    return a;
}

void write_loss_csv(const std::string& path, const std::vector<std::pair<int, double>>& rows, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    if (!append) out << "step,loss\n";
    for (const auto& [step, loss] : rows) out << step << ',' << fmt17(loss) << "\n";
}

void check_hash(const std::string& a_name, const std::string& a, const std::string& b_name,
                const std::string& b) {
    if (!a.empty() && !b.empty() && a != b)
        throw UsageError("config hash mismatch between " + a_name + " (" + a + ") and " + b_name + " (" + b +
                         ")");
}

// ---------------------------------------------------------------------------

int cmd_phantom(const std::string& spec_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed) {
    require_exists(spec_path, "phantom spec");
    sh::PhantomSpec spec = sh::PhantomSpec::load(spec_path);
    if (seed) spec.seed = *seed;
    const sh::PhantomResult result = sh::make_phantom(spec);

    fs::create_directories(out_dir);
    const std::string shv = out_dir + "/phantom.shv";
    const std::string trk = out_dir + "/ground_truth.trk";
    const std::string gtj = out_dir + "/ground_truth.json";
    sh::write_shv(result.volume, shv);

    tract::Tractogram t;
    t.extents[0] = result.volume.h;
    t.extents[1] = result.volume.w;
    t.extents[2] = result.volume.d;
    t.voxel_size = result.volume.voxel_size;
    t.affine = result.volume.affine;
    for (const sh::GroundTruthBundle& b : result.ground_truth.bundles)
        for (const tract::Streamline& s : b.streamlines) t.streamlines.push_back(s);
    tract::write_trk(t, trk);
    result.ground_truth.save(gtj);

    std::cout << "bundles=" << result.ground_truth.bundles.size()
              << " streamlines=" << result.ground_truth.total_streamlines()
              << " voxels=" << result.volume.voxel_count() << " volume=" << shv << " tractogram=" << trk
              << " ground_truth=" << gtj << "\n";
    return 0;
}

int cmd_train_vae(const cfg::RunConfig& c, const std::string& out_dir) {
    auto pairs = load_pairs(c);
    data::TrainingDataset ds = data::build_training_dataset(std::move(pairs), c.points, augment_spec(c));
    ds.stats.config_hash = c.config_hash;

    fs::create_directories(out_dir);
    ds.stats.save(out_dir + "/stats.json");

    std::vector<const sh::SHVolume*> vols;
    for (const data::Subject& s : ds.subjects) vols.push_back(&s.volume);
    enc::VaeTrainResult result = enc::train_vaes(vols, encoder_config(c), c.seed);

    nlohmann::json meta;
    meta["config_hash"] = c.config_hash;
    meta["seed"] = c.seed;
    nd::Checkpoint ckpt = pack_vaes(result.vaes, encoder_config(c), meta);
    ckpt.save(out_dir + "/vae.ckpt");

    std::ofstream csv(out_dir + "/vae_loss.csv", std::ios::trunc);
    csv << "channel,step,loss\n";
    double final_loss = 0.0;
    for (std::size_t ch = 0; ch < result.loss_curves.size(); ++ch) {
        for (const auto& [step, loss] : result.loss_curves[ch]) csv << ch << ',' << step << ',' << fmt17(loss) << "\n";
        final_loss += result.loss_curves[ch].back().second;
    }
    final_loss /= static_cast<double>(result.loss_curves.size());

    std::cout << "vae_checkpoint=" << out_dir << "/vae.ckpt channels=" << result.vaes.size()
              << " final_loss=" << fmt17(final_loss) << " stats=" << out_dir << "/stats.json\n";
    return 0;
}

struct Stage2Stack {
    tract::ScalingStats stats;
    std::vector<enc::VaeParams> vaes;
    enc::RefinerParams refiner;
    gen::GeneratorParams generator;
    std::optional<gen::NoiseSchedule> schedule;
};

gen::GeneratorConfig generator_config(const cfg::RunConfig& c, int m) {
    gen::GeneratorConfig g;
    g.layers = c.layers;
    g.width = c.width;
    g.heads = c.heads;
    g.points = c.points;
    g.context_channels = m * c.c_c;
    g.objective = gen::objective_from_string(c.objective_kind);
    g.timesteps = c.timesteps;
    return g;
}

Stage2Stack fresh_stage2(const cfg::RunConfig& c, const std::string& run_dir, bool load_generator) {
    Stage2Stack s;
    require_exists(run_dir + "/stats.json", "scaling stats (run train-vae first)");
    require_exists(run_dir + "/vae.ckpt", "stage-1 VAE checkpoint (run train-vae first)");
    s.stats = tract::ScalingStats::load(run_dir + "/stats.json");
    check_hash("stats.json", s.stats.config_hash, "run config", c.config_hash);

    nd::Checkpoint vae_ckpt = nd::Checkpoint::load(run_dir + "/vae.ckpt");
    check_hash("vae.ckpt", vae_ckpt.meta.value("config_hash", ""), "run config", c.config_hash);
    s.vaes = unpack_vaes(vae_ckpt, encoder_config(c));
    const int m = static_cast<int>(s.vaes.size());

    nd::Rng init_rng(nd::derive_seed(c.seed, 0x5747u));
    s.refiner = enc::RefinerParams::init(encoder_config(c), m, init_rng);
    s.generator = gen::GeneratorParams::init(generator_config(c, m), init_rng);
    if (s.generator.cfg.objective == gen::Objective::Diffusion)
        s.schedule = gen::NoiseSchedule::cosine(c.timesteps);

    if (load_generator) {
        require_exists(run_dir + "/gen.ckpt", "stage-2 checkpoint (run train first)");
        nd::Checkpoint ckpt = nd::Checkpoint::load(run_dir + "/gen.ckpt");
        check_hash("gen.ckpt", ckpt.meta.value("config_hash", ""), "run config", c.config_hash);
        unpack_stage2(ckpt, s.refiner, s.generator, nullptr);
    }
    return s;
}

int cmd_train(const cfg::RunConfig& c, const std::string& out_dir) {
    Stage2Stack s = fresh_stage2(c, out_dir, /*load_generator=*/false);

    auto pairs = load_pairs(c);
    data::TrainingDataset ds =
        data::build_training_dataset(std::move(pairs), c.points, augment_spec(c), &s.stats);

    gen::ParamList params = gen::stage2_params(s.refiner, s.generator);
    nd::Adam opt(params.tensors, nd::AdamConfig{c.lr, 0.9, 0.999, 1e-8});

    int start_step = 0;
    const std::string ckpt_path = out_dir + "/gen.ckpt";
    const std::string loss_path = out_dir + "/train_loss.csv";
    if (fs::exists(ckpt_path)) {
        nd::Checkpoint ckpt = nd::Checkpoint::load(ckpt_path);
        check_hash("gen.ckpt", ckpt.meta.value("config_hash", ""), "run config", c.config_hash);
        unpack_stage2(ckpt, s.refiner, s.generator, &opt);
        start_step = ckpt.meta.value("step", 0);
        if (start_step >= c.steps) {
            std::cout << "checkpoint=" << ckpt_path << " step=" << start_step << " (already trained)\n";
            return 0;
        }
        std::cerr << "resuming from step " << start_step << "\n";
    }

    nlohmann::json meta;
    meta["config_hash"] = c.config_hash;
    meta["seed"] = c.seed;

    std::vector<std::pair<int, double>> rows;
    const auto save_ckpt = [&](int next_step) {
        nlohmann::json m2 = meta;
        m2["step"] = next_step;
        nd::Checkpoint ckpt = pack_stage2(s.refiner, s.generator, &opt, m2);
        ckpt.save(ckpt_path);
    };

    gen::Stage2Options opts;
    opts.lr = c.lr;
    opts.batch = c.batch;
    opts.steps = c.steps;
    opts.seed = c.seed;
    opts.start_step = start_step;

    double last_loss = 0.0;
    try {
        gen::train_generator(ds, s.vaes, s.refiner, s.generator,
                             s.schedule ? &*s.schedule : nullptr, opts, opt, [&](int step, double loss) {
                                 rows.emplace_back(step, loss);
                                 last_loss = loss;
                                 if (c.checkpoint_every > 0 && (step + 1) % c.checkpoint_every == 0 &&
                                     step + 1 < c.steps)
                                     save_ckpt(step + 1);
                             });
    } catch (const gen::TrainDivergence& e) {
        write_loss_csv(loss_path, rows, start_step > 0);
        std::cerr << e.what() << " (last good checkpoint: " << ckpt_path << ")\n";
        return 3;
    }
    save_ckpt(c.steps);
    write_loss_csv(loss_path, rows, start_step > 0);
    std::cout << "checkpoint=" << ckpt_path << " steps=" << c.steps << " final_loss=" << fmt17(last_loss)
              << " loss_csv=" << loss_path << "\n";
    return 0;
}

sh::SHVolume load_variant_volume(const std::string& path, double corrupt_sigma, double downsample_mm,
                                 std::uint64_t seed) {
    require_exists(path, "volume");
    sh::SHVolume v = sh::read_shv(path);
    if (corrupt_sigma > 0.0) v = sh::rician_corrupt(v, corrupt_sigma, 2 * v.m() + 16, nd::derive_seed(seed, 0xA11CE));
    if (downsample_mm > 0.0) v = sh::downsample(v, downsample_mm);
    return v;
}

int cmd_generate(const cfg::RunConfig& c, const std::string& run_dir, const std::string& volume_path,
                 const std::string& out_trk, std::optional<int> count, std::optional<int> steps,
                 std::optional<std::uint64_t> seed, double corrupt_sigma, double downsample_mm) {
    Stage2Stack s = fresh_stage2(c, run_dir, /*load_generator=*/true);

    gen::GenerateOptions opts;
    opts.count = count.value_or(c.sample_count);
    opts.steps = steps.value_or(c.sample_steps);
    opts.batch_size = c.sample_batch_size;
    opts.seed = seed.value_or(c.sample_seed);

    const sh::SHVolume volume = load_variant_volume(volume_path, corrupt_sigma, downsample_mm, opts.seed);
    gen::GenerateOutput out =
        gen::generate_tractogram(volume, s.stats, s.vaes, s.refiner, s.generator,
                                 s.schedule ? &*s.schedule : nullptr, opts);

    if (!out_trk.empty()) {
        const fs::path parent = fs::path(out_trk).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
    }
    tract::write_trk(out.tractogram, out_trk);
    nlohmann::json meta;
    meta["config_hash"] = c.config_hash;
    meta["objective"] = c.objective_kind;
    meta["steps"] = opts.steps;
    meta["count"] = opts.count;
    meta["seed"] = opts.seed;
    meta["wall_clock_s"] = out.wall_seconds;
    meta["corrupt_sigma"] = corrupt_sigma;
    meta["downsample_mm"] = downsample_mm;
    eval::write_text_file(out_trk + ".meta.json", meta.dump(2) + "\n");

    std::cout << "trk=" << out_trk << " streamlines=" << out.tractogram.streamlines.size()
              << " steps=" << opts.steps << " wall_clock_s=" << fmt17(out.wall_seconds) << "\n";
    return 0;
}

eval::MetricsReport evaluate_one(const cfg::RunConfig& c, const std::string& trk_path,
                                 const sh::GroundTruth& gt, const tract::ScalingStats* stats,
                                 const std::string& run_id) {
    tract::Tractogram t = tract::read_trk(trk_path);
    if (t.streamlines.empty()) throw UsageError("tractogram '" + trk_path + "' is empty");

    nlohmann::json meta;
    const std::string meta_path = trk_path + ".meta.json";
    if (fs::exists(meta_path)) {
        std::ifstream in(meta_path);
        in >> meta;
        check_hash(meta_path, meta.value("config_hash", ""), "run config", c.config_hash);
    }
    if (stats != nullptr) {
        check_hash("stats.json", stats->config_hash, "run config", c.config_hash);
        t.out_of_bounds.clear();
        for (const tract::Streamline& s : t.streamlines)
            t.out_of_bounds.push_back(tract::out_of_bounds_scaled(tract::minmax_scale(s, *stats)) ? 1 : 0);
    }

    const double tau_mm = c.tau_voxels * gt.voxel_size_mm;
    const eval::FilterResult fr = eval::filter_streamlines(t, gt, tau_mm);

    eval::MetricsReport r;
    r.run_id = run_id;
    r.objective = meta.is_object() && meta.contains("objective") ? meta["objective"].get<std::string>()
                                                                 : c.objective_kind;
    r.layers = c.layers;
    r.width = c.width;
    r.steps = meta.is_object() && meta.contains("steps") ? meta["steps"].get<int>() : c.sample_steps;
    r.count = static_cast<int>(t.streamlines.size());
    r.precision = eval::precision(fr);
    r.bundles_discovered = eval::bundles_discovered(fr, gt, c.min_bundle_streamlines);
    r.bundle_total = static_cast<int>(gt.bundles.size());
    r.wall_clock_s = meta.is_object() && meta.contains("wall_clock_s") ? meta["wall_clock_s"].get<double>() : 0.0;
    r.seed = meta.is_object() && meta.contains("seed") ? meta["seed"].get<std::uint64_t>() : c.sample_seed;
    r.config_hash = c.config_hash;
    return r;
}

int cmd_evaluate(const cfg::RunConfig& c, const std::string& trk_path, const std::string& gt_path,
                 const std::string& out_dir, const std::string& stats_path, const std::string& run_id) {
    require_exists(trk_path, "tractogram");
    require_exists(gt_path, "ground truth");
    const sh::GroundTruth gt = sh::GroundTruth::load(gt_path);
    std::optional<tract::ScalingStats> stats;
    if (!stats_path.empty()) {
        require_exists(stats_path, "scaling stats");
        stats = tract::ScalingStats::load(stats_path);
    }
    const eval::MetricsReport r = evaluate_one(c, trk_path, gt, stats ? &*stats : nullptr, run_id);

    fs::create_directories(out_dir);
    eval::write_text_file(out_dir + "/metrics.csv", eval::metrics_csv({r}));
    eval::write_text_file(out_dir + "/metrics.svg", eval::sweep_svg({r}));
    std::cout << "precision=" << fmt17(r.precision) << " bundles=" << r.bundles_discovered << "/"
              << r.bundle_total << " csv=" << out_dir << "/metrics.csv\n";
    return 0;
}

int cmd_sweep_steps(const cfg::RunConfig& c, const std::string& run_dir, const std::string& volume_path,
                    const std::string& gt_path, const std::string& out_dir,
                    const std::vector<int>& step_list, double corrupt_sigma, double downsample_mm,
                    std::optional<std::uint64_t> seed) {
    require_exists(gt_path, "ground truth");
    const sh::GroundTruth gt = sh::GroundTruth::load(gt_path);
    Stage2Stack s = fresh_stage2(c, run_dir, /*load_generator=*/true);
    const std::uint64_t sample_seed = seed.value_or(c.sample_seed);

    struct Variant {
        std::string tag;
        double sigma, mm;
    };
    std::vector<Variant> variants = {{"clean", 0.0, 0.0}};
    if (corrupt_sigma > 0.0) variants.push_back({"noisy", corrupt_sigma, 0.0});
    if (downsample_mm > 0.0) variants.push_back({"downsampled", 0.0, downsample_mm});

    fs::create_directories(out_dir);
    std::vector<eval::MetricsReport> reports;
    for (const Variant& var : variants) {
        const sh::SHVolume volume = load_variant_volume(volume_path, var.sigma, var.mm, sample_seed);
        for (int steps : step_list) {
            gen::GenerateOptions opts;
            opts.count = c.sample_count;
            opts.steps = steps;
            opts.batch_size = c.sample_batch_size;
            opts.seed = sample_seed;
            gen::GenerateOutput out =
                gen::generate_tractogram(volume, s.stats, s.vaes, s.refiner, s.generator,
                                         s.schedule ? &*s.schedule : nullptr, opts);
            const std::string run_id = "steps" + std::to_string(steps) + "_" + var.tag;
            const std::string trk = out_dir + "/" + run_id + ".trk";
            tract::write_trk(out.tractogram, trk);

            nlohmann::json meta;
            meta["config_hash"] = c.config_hash;
            meta["objective"] = c.objective_kind;
            meta["steps"] = steps;
            meta["count"] = opts.count;
            meta["seed"] = opts.seed;
            meta["wall_clock_s"] = out.wall_seconds;
            eval::write_text_file(trk + ".meta.json", meta.dump(2) + "\n");

            reports.push_back(evaluate_one(c, trk, gt, &s.stats, run_id));
            std::cout << "run=" << run_id << " precision=" << fmt17(reports.back().precision)
                      << " bundles=" << reports.back().bundles_discovered << "/" << reports.back().bundle_total
                      << " wall_clock_s=" << fmt17(out.wall_seconds) << "\n";
        }
    }
    eval::write_text_file(out_dir + "/sweep.csv", eval::metrics_csv(reports));
    eval::write_text_file(out_dir + "/sweep.svg", eval::sweep_svg(reports));
    std::cout << "sweep_csv=" << out_dir << "/sweep.csv sweep_svg=" << out_dir << "/sweep.svg rows="
              << reports.size() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gentract: conditional generative tractography on synthetic phantoms"};
    app.require_subcommand(1);

    std::string config_path, out_dir, spec_path, run_dir, volume_path, trk_path, gt_path, stats_path;
    std::string run_id = "eval";
    std::string steps_csv = "5,10,25,50";
    std::optional<std::uint64_t> seed;
    std::optional<int> count, steps;
    double corrupt_sigma = 0.0, downsample_mm = 0.0;

    auto* phantom = app.add_subcommand("phantom", "Synthesize a phantom volume with analytic ground truth");
    phantom->add_option("--spec", spec_path, "Phantom spec JSON")->required();
    phantom->add_option("--out", out_dir, "Output directory")->required();
    phantom->add_option("--seed", seed, "Override the spec seed");

    auto* train_vae = app.add_subcommand("train-vae", "Stage 1: train per-coefficient VAEs");
    train_vae->add_option("--config", config_path, "Run config TOML")->required();
    train_vae->add_option("--out", out_dir, "Run directory")->required();

    auto* train = app.add_subcommand("train", "Stage 2: train the conditional generator");
    train->add_option("--config", config_path, "Run config TOML")->required();
    train->add_option("--out", out_dir, "Run directory (holds vae.ckpt + stats.json)")->required();

    auto* generate = app.add_subcommand("generate", "Sample a tractogram from a trained model");
    generate->add_option("--config", config_path, "Run config TOML")->required();
    generate->add_option("--run", run_dir, "Run directory with checkpoints")->required();
    generate->add_option("--volume", volume_path, "Conditioning SHV volume")->required();
    generate->add_option("--out", out_dir, "Output TRK path")->required();
    generate->add_option("--count", count, "Streamline count override");
    generate->add_option("--steps", steps, "Sampler steps override");
    generate->add_option("--seed", seed, "Sampling seed override");
    generate->add_option("--corrupt-sigma", corrupt_sigma, "Rician-corrupt the input volume first");
    generate->add_option("--downsample-mm", downsample_mm, "Downsample the input volume first");

    auto* evaluate = app.add_subcommand("evaluate", "Score a tractogram against ground truth");
    evaluate->add_option("--config", config_path, "Run config TOML")->required();
    evaluate->add_option("--tractogram", trk_path, "TRK to score")->required();
    evaluate->add_option("--ground-truth", gt_path, "Ground truth JSON")->required();
    evaluate->add_option("--out", out_dir, "Report directory")->required();
    evaluate->add_option("--stats", stats_path, "Scaling stats (enables out-of-bounds flagging)");
    evaluate->add_option("--run-id", run_id, "Row label in the metrics CSV");

    auto* sweep = app.add_subcommand("sweep-steps", "Generate + evaluate across sampler step counts");
    sweep->add_option("--config", config_path, "Run config TOML")->required();
    sweep->add_option("--run", run_dir, "Run directory with checkpoints")->required();
    sweep->add_option("--volume", volume_path, "Conditioning SHV volume")->required();
    sweep->add_option("--ground-truth", gt_path, "Ground truth JSON")->required();
    sweep->add_option("--out", out_dir, "Report directory")->required();
    sweep->add_option("--steps", steps_csv, "Comma-separated step counts");
    sweep->add_option("--seed", seed, "Sampling seed override");
    sweep->add_option("--corrupt-sigma", corrupt_sigma, "Also run a Rician-corrupted variant");
    sweep->add_option("--downsample-mm", downsample_mm, "Also run a downsampled variant");

    CLI11_PARSE(app, argc, argv);

    try {
        if (phantom->parsed()) return cmd_phantom(spec_path, out_dir, seed);

        const cfg::RunConfig c = cfg::RunConfig::load(config_path);
        if (train_vae->parsed()) return cmd_train_vae(c, out_dir);
        if (train->parsed()) return cmd_train(c, out_dir);
        if (generate->parsed())
            return cmd_generate(c, run_dir, volume_path, out_dir, count, steps, seed, corrupt_sigma,
                                downsample_mm);
        if (evaluate->parsed()) return cmd_evaluate(c, trk_path, gt_path, out_dir, stats_path, run_id);
        if (sweep->parsed()) {
            std::vector<int> step_list;
            std::stringstream ss(steps_csv);
            std::string item;
            while (std::getline(ss, item, ',')) step_list.push_back(std::stoi(item));
            if (step_list.empty()) throw UsageError("--steps: empty step list");
            return cmd_sweep_steps(c, run_dir, volume_path, gt_path, out_dir, step_list, corrupt_sigma,
                                   downsample_mm, seed);
        }
    } catch (const gen::TrainDivergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
