#include "gentract/persist.hpp"

#include <stdexcept>

namespace gentract {

namespace {

void place(nd::Checkpoint& ckpt, const std::string& name, const nd::Tensor& t) {
    if (!ckpt.tensors.emplace(name, t).second)
        throw std::logic_error("checkpoint: duplicate tensor name '" + name + "'");
}

void take(const nd::Checkpoint& ckpt, const std::string& name, nd::Tensor& into) {
    const nd::Tensor& src = ckpt.at(name);
    if (!src.same_shape(into))
        throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " +
                                 nd::Tensor::shape_str(src.shape()) + ", expected " +
                                 nd::Tensor::shape_str(into.shape()));
    into = src;
}

}  // namespace

nd::Checkpoint pack_vaes(std::vector<enc::VaeParams>& vaes, const enc::EncoderConfig& cfg,
                         nlohmann::json meta) {
    nd::Checkpoint ckpt;
    meta["m"] = vaes.size();
    meta["encoder"] = {{"enc_ch1", cfg.enc_ch1}, {"enc_ch2", cfg.enc_ch2}, {"C_z", cfg.c_z}};
    ckpt.meta = std::move(meta);
    for (std::size_t i = 0; i < vaes.size(); ++i) {
        const std::string prefix = "vae" + std::to_string(i) + ".";
        vaes[i].visit([&](const std::string& name, nd::Tensor& t) { place(ckpt, prefix + name, t); });
    }
    return ckpt;
}

std::vector<enc::VaeParams> unpack_vaes(const nd::Checkpoint& ckpt, const enc::EncoderConfig& cfg) {
    const int m = ckpt.meta.at("m").get<int>();
    const auto& e = ckpt.meta.at("encoder");
    if (e.at("enc_ch1").get<int>() != cfg.enc_ch1 || e.at("enc_ch2").get<int>() != cfg.enc_ch2 ||
        e.at("C_z").get<int>() != cfg.c_z)
        throw std::runtime_error("vae checkpoint: encoder architecture disagrees with the run config");
    std::vector<enc::VaeParams> vaes;
    vaes.reserve(static_cast<std::size_t>(m));
    nd::Rng rng(0);
    for (int i = 0; i < m; ++i) {
        enc::VaeParams p = enc::VaeParams::init(cfg, rng);
        const std::string prefix = "vae" + std::to_string(i) + ".";
        p.visit([&](const std::string& name, nd::Tensor& t) { take(ckpt, prefix + name, t); });
        vaes.push_back(std::move(p));
    }
    return vaes;
}

nd::Checkpoint pack_stage2(enc::RefinerParams& refiner, gen::GeneratorParams& generator, nd::Adam* opt,
                           nlohmann::json meta) {
    nd::Checkpoint ckpt;
    meta["m"] = refiner.m;
    meta["C_c"] = refiner.c_c;
    meta["model"] = {{"M", generator.cfg.layers},
                     {"n", generator.cfg.width},
                     {"heads", generator.cfg.heads},
                     {"p", generator.cfg.points},
                     {"context_channels", generator.cfg.context_channels}};
    meta["objective"] = gen::objective_to_string(generator.cfg.objective);
    meta["T"] = generator.cfg.timesteps;
    ckpt.meta = std::move(meta);

    gen::ParamList params = gen::stage2_params(refiner, generator);
    for (std::size_t i = 0; i < params.tensors.size(); ++i) place(ckpt, params.names[i], *params.tensors[i]);
    if (opt != nullptr) {
        ckpt.meta["adam_step"] = opt->step_count();
        for (std::size_t i = 0; i < params.tensors.size(); ++i) {
            place(ckpt, "opt.m." + params.names[i], opt->moment1(i));
            place(ckpt, "opt.v." + params.names[i], opt->moment2(i));
        }
    }
    return ckpt;
}

void unpack_stage2(const nd::Checkpoint& ckpt, enc::RefinerParams& refiner, gen::GeneratorParams& generator,
                   nd::Adam* opt) {
    gen::ParamList params = gen::stage2_params(refiner, generator);
    for (std::size_t i = 0; i < params.tensors.size(); ++i) take(ckpt, params.names[i], *params.tensors[i]);
    if (opt != nullptr) {
        if (!ckpt.meta.contains("adam_step"))
            throw std::runtime_error("stage-2 checkpoint: optimizer state missing, cannot resume");
        opt->restore(ckpt.meta.at("adam_step").get<std::int64_t>());
        for (std::size_t i = 0; i < params.tensors.size(); ++i) {
            take(ckpt, "opt.m." + params.names[i], opt->moment1(i));
            take(ckpt, "opt.v." + params.names[i], opt->moment2(i));
        }
    }
}

}  // namespace gentract
