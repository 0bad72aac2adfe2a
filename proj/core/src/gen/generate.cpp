#include "gentract/gen/generate.hpp"

#include <chrono>
#include <cmath>

#include "gentract/data/dataset.hpp"
#include "gentract/gen/sampler.hpp"
#include "gentract/gen/train.hpp"
#include "gentract/nd/ops.hpp"

namespace gentract::gen {

GenerateOutput generate_tractogram(const sh::SHVolume& raw_volume, const tract::ScalingStats& stats,
                                   std::vector<enc::VaeParams>& vaes, enc::RefinerParams& refiner,
                                   GeneratorParams& gen, const NoiseSchedule* schedule,
                                   const GenerateOptions& opts) {
    if (opts.count < 1 || opts.batch_size < 1 || opts.steps < 1)
        throw std::invalid_argument("generate: count, batch_size, steps must be >= 1");
    const bool diffusion = gen.cfg.objective == Objective::Diffusion;
    if (diffusion && schedule == nullptr) throw std::invalid_argument("generate: diffusion needs a schedule");

    const auto t_start = std::chrono::steady_clock::now();

    const sh::SHVolume volume = tract::zscore_volume(raw_volume, stats);
    if (static_cast<int>(vaes.size()) != volume.m())
        throw std::invalid_argument("generate: VAE count disagrees with volume coefficient count");

    // Conditioning tokens once per volume.
    std::vector<nd::Tensor> latents;
    latents.reserve(vaes.size());
    for (std::size_t ch = 0; ch < vaes.size(); ++ch)
        latents.push_back(enc::vae_latent_mean(vaes[ch], volume, static_cast<int>(ch)));
    nd::Tensor ctx_value;
    {
        nd::Graph g;
        nd::Var ctx = build_context(g, refiner, gen, latents, /*frozen=*/true);
        ctx_value = ctx.value();  // (1, tok, n)
    }

    const int p = gen.cfg.points;
    tract::Tractogram out;
    out.extents[0] = raw_volume.h;
    out.extents[1] = raw_volume.w;
    out.extents[2] = raw_volume.d;
    out.voxel_size = raw_volume.voxel_size;
    out.affine = raw_volume.affine;
    out.streamlines.reserve(static_cast<std::size_t>(opts.count));
    out.out_of_bounds.reserve(static_cast<std::size_t>(opts.count));

    const auto batch_model = [&](const nd::Tensor& x, const TimeBatch& tb) {
        nd::Graph g;
        nd::Var ctx = nd::broadcast_axis(g.input(ctx_value), 0, x.dim(0));
        nd::Var pred = generator_forward(g, gen, g.input(x), tb, ctx, /*frozen=*/true);
        return pred.value();
    };

    for (int begin = 0; begin < opts.count; begin += opts.batch_size) {
        const int b = std::min(opts.batch_size, opts.count - begin);
        nd::Tensor x({b, p, 3});
        for (int i = 0; i < b; ++i) {
            nd::Rng rng(opts.seed, static_cast<std::uint64_t>(begin + i));
            for (std::int64_t j = 0; j < static_cast<std::int64_t>(p) * 3; ++j)
                x[static_cast<std::int64_t>(i) * p * 3 + j] = rng.normal();
        }

        nd::Tensor sampled;
        if (diffusion) {
            const auto eps_model = [&](const nd::Tensor& xt, int t) {
                TimeBatch tb;
                tb.steps.assign(static_cast<std::size_t>(xt.dim(0)), t);
                return batch_model(xt, tb);
            };
            sampled = ddim_sample_from(std::move(x), eps_model, *schedule, opts.steps);
        } else {
            const auto field = [&](const nd::Tensor& xt, double t) {
                TimeBatch tb;
                tb.times.assign(static_cast<std::size_t>(xt.dim(0)), t);
                return batch_model(xt, tb);
            };
            sampled = euler_ode_sample_from(std::move(x), field, opts.steps);
        }

        for (int i = 0; i < b; ++i) {
            nd::Tensor one({p, 3});
            std::copy(sampled.data() + static_cast<std::int64_t>(i) * p * 3,
                      sampled.data() + static_cast<std::int64_t>(i + 1) * p * 3, one.data());
            const tract::Streamline scaled = data::tensor_to_streamline(one);
            out.out_of_bounds.push_back(tract::out_of_bounds_scaled(scaled) ? 1 : 0);
            out.streamlines.push_back(tract::minmax_unscale(scaled, stats));
        }
    }

    const auto t_end = std::chrono::steady_clock::now();
    GenerateOutput result;
    result.tractogram = std::move(out);
    result.wall_seconds = std::chrono::duration<double>(t_end - t_start).count();
    return result;
}

}  // namespace gentract::gen
