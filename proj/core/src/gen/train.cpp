#include "gentract/gen/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gentract/gen/loss.hpp"
#include "gentract/nd/ops.hpp"

namespace gentract::gen {

ParamList stage2_params(enc::RefinerParams& refiner, GeneratorParams& gen) {
    ParamList out;
    refiner.visit([&](const std::string& name, nd::Tensor& t) {
        out.names.push_back("refiner." + name);
        out.tensors.push_back(&t);
    });
    gen.visit([&](const std::string& name, nd::Tensor& t) {
        out.names.push_back("gen." + name);
        out.tensors.push_back(&t);
    });
    return out;
}

std::vector<std::vector<nd::Tensor>> precompute_latents(std::vector<enc::VaeParams>& vaes,
                                                        const data::TrainingDataset& dataset) {
    std::vector<std::vector<nd::Tensor>> latents(dataset.subjects.size());
    for (std::size_t si = 0; si < dataset.subjects.size(); ++si) {
        const sh::SHVolume& vol = dataset.subjects[si].volume;
        if (static_cast<int>(vaes.size()) != vol.m())
            throw std::invalid_argument("stage 2: VAE count disagrees with volume coefficient count");
        latents[si].reserve(vaes.size());
        for (std::size_t ch = 0; ch < vaes.size(); ++ch)
            latents[si].push_back(enc::vae_latent_mean(vaes[ch], vol, static_cast<int>(ch)));
    }
    return latents;
}

nd::Var build_context(nd::Graph& g, enc::RefinerParams& refiner, GeneratorParams& gen,
                      const std::vector<nd::Tensor>& latents, bool frozen) {
    std::vector<enc::RefinedLatent> refined;
    refined.reserve(latents.size());
    for (std::size_t ch = 0; ch < latents.size(); ++ch) {
        nd::Var z = g.input(latents[ch]);
        refined.push_back({static_cast<int>(ch), enc::refine(g, refiner, z, static_cast<int>(ch), frozen)});
    }
    nd::Var tokens = enc::fuse(g, refined);  // (tok, m * c_c)
    nd::Var projected = project_context(g, gen, tokens, frozen);
    const auto& sh = projected.shape();
    return nd::reshape(projected, {1, sh[0], sh[1]});
}

void train_generator(const data::TrainingDataset& dataset, std::vector<enc::VaeParams>& vaes,
                     enc::RefinerParams& refiner, GeneratorParams& gen, const NoiseSchedule* schedule,
                     const Stage2Options& opts, nd::Adam& optimizer,
                     const std::function<void(int, double)>& on_step) {
    const bool diffusion = gen.cfg.objective == Objective::Diffusion;
    if (diffusion && schedule == nullptr) throw std::invalid_argument("stage 2: diffusion needs a schedule");
    const std::size_t total = dataset.total_streamlines();
    if (total == 0) throw std::invalid_argument("stage 2: dataset has no streamlines");
    const int p = dataset.points;
    if (p != gen.cfg.points) throw std::invalid_argument("stage 2: dataset p disagrees with the model");

    const auto latents = precompute_latents(vaes, dataset);

    for (int step = opts.start_step; step < opts.steps; ++step) {
        nd::Rng rng(opts.seed, static_cast<std::uint64_t>(step));
        const int B = opts.batch;

        std::vector<std::pair<int, int>> picks(static_cast<std::size_t>(B));
        for (auto& pk : picks) pk = dataset.locate(static_cast<std::size_t>(rng.uniform_int(static_cast<int>(total))));

        nd::Tensor data_batch({B, p, 3});
        for (int b = 0; b < B; ++b) {
            const nd::Tensor& s = dataset.subjects[static_cast<std::size_t>(picks[static_cast<std::size_t>(b)].first)]
                                      .streamlines[static_cast<std::size_t>(picks[static_cast<std::size_t>(b)].second)];
            std::copy(s.data(), s.data() + s.numel(), data_batch.data() + static_cast<std::int64_t>(b) * p * 3);
        }

        TimeBatch tb;
        nd::Tensor xt, target({B, p, 3});
        if (diffusion) {
            tb.steps.resize(static_cast<std::size_t>(B));
            nd::Tensor eps({B, p, 3});
            for (std::int64_t i = 0; i < eps.numel(); ++i) eps[i] = rng.normal();
            for (int b = 0; b < B; ++b) tb.steps[static_cast<std::size_t>(b)] = rng.uniform_int(schedule->timesteps);
            xt = diffusion_corrupt(data_batch, tb.steps, eps, *schedule);
            target = eps;
        } else {
            tb.times.resize(static_cast<std::size_t>(B));
            nd::Tensor noise({B, p, 3});
            for (std::int64_t i = 0; i < noise.numel(); ++i) noise[i] = rng.normal();
            for (int b = 0; b < B; ++b) tb.times[static_cast<std::size_t>(b)] = rng.uniform();
            xt = fm_interpolate(noise, data_batch, tb.times);
            for (std::int64_t i = 0; i < target.numel(); ++i) target[i] = data_batch[i] - noise[i];
        }

        nd::Graph g;
        // One context subgraph per distinct subject in the batch.
        std::set<int> distinct;
        for (const auto& pk : picks) distinct.insert(pk.first);
        std::map<int, nd::Var> ctx_by_subject;
        for (int si : distinct)
            ctx_by_subject.emplace(si, build_context(g, refiner, gen, latents[static_cast<std::size_t>(si)], false));

        nd::Var ctx{nullptr, -1};
        if (distinct.size() == 1) {
            ctx = nd::broadcast_axis(ctx_by_subject.begin()->second, 0, B);
        } else {
            std::vector<nd::Var> per_item;
            per_item.reserve(static_cast<std::size_t>(B));
            for (const auto& pk : picks) per_item.push_back(ctx_by_subject.at(pk.first));
            ctx = nd::concat(per_item, 0);
        }

        nd::Var pred = generator_forward(g, gen, g.input(xt), tb, ctx, false);
        nd::Var diff = nd::sub(pred, g.input(target));
        nd::Var loss = nd::mean_all(nd::mul(diff, diff));

        const double loss_val = loss.value().item();
        if (!std::isfinite(loss_val)) throw TrainDivergence(step);
        optimizer.step(g.backward(loss));
        if (on_step) on_step(step, loss_val);
    }
}

}  // namespace gentract::gen
