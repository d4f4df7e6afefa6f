#include "downscale/losses.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "downscale/error.hpp"
#include "downscale/rng.hpp"

namespace dsc {

using ad::Var;
using nlohmann::json;

std::string TrainConfig::to_json() const {
    json j;
    j["lr_gen"] = lr_gen;
    j["lr_critic"] = lr_critic;
    j["content_weight"] = content_weight;
    j["gp_weight"] = gp_weight;
    j["content_ensemble"] = content_ensemble;
    j["epochs"] = epochs;
    j["critic_steps_per_gen"] = critic_steps_per_gen;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["batch_size"] = batch_size;
    j["steps_per_epoch"] = steps_per_epoch;
    j["lr_patch"] = lr_patch;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    TrainConfig c;
    c.lr_gen = j.value("lr_gen", c.lr_gen);
    c.lr_critic = j.value("lr_critic", c.lr_critic);
    c.content_weight = j.value("content_weight", c.content_weight);
    c.gp_weight = j.value("gp_weight", c.gp_weight);
    c.content_ensemble = j.value("content_ensemble", c.content_ensemble);
    c.epochs = j.value("epochs", c.epochs);
    c.critic_steps_per_gen = j.value("critic_steps_per_gen", c.critic_steps_per_gen);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.lr_patch = j.value("lr_patch", c.lr_patch);
    c.seed = j.value("seed", c.seed);
    require(c.lr_gen > 0 && c.lr_critic > 0 && c.content_weight > 0 && c.gp_weight > 0 &&
                c.content_ensemble > 0 && c.epochs > 0 && c.critic_steps_per_gen > 0 &&
                c.batch_size > 0 && c.steps_per_epoch > 0 && c.lr_patch > 0,
            "train config: all quantities must be positive");
    return c;
}

BatchTensors BatchTensors::stack(std::span<const TrainingBatch> samples) {
    require(!samples.empty(), "batch stack: no samples");
    const TrainingBatch& first = samples[0];
    const int n = static_cast<int>(samples.size());
    BatchTensors out;
    out.noise_channels = first.noise_channels;
    out.predictors = Tensor({n, 9, first.lr_h, first.lr_w});
    out.statics = Tensor({n, 2, first.hr_h, first.hr_w});
    out.target = Tensor({n, 1, first.hr_h, first.hr_w});

    const std::size_t lr_plane = static_cast<std::size_t>(first.lr_h) * first.lr_w;
    const std::size_t hr_plane = static_cast<std::size_t>(first.hr_h) * first.hr_w;
    for (int s = 0; s < n; ++s) {
        const TrainingBatch& b = samples[s];
        require(b.lr_h == first.lr_h && b.lr_w == first.lr_w && b.hr_h == first.hr_h &&
                    b.hr_w == first.hr_w && b.noise_channels == first.noise_channels,
                "batch stack: inconsistent sample shapes");
        // The stored lr stacks 9 predictors then noise; only predictors are kept.
        std::copy(b.lr.begin(), b.lr.begin() + 9 * lr_plane,
                  out.predictors.data.begin() + static_cast<std::size_t>(s) * 9 * lr_plane);
        std::copy(b.hr_static.begin(), b.hr_static.end(),
                  out.statics.data.begin() + static_cast<std::size_t>(s) * 2 * hr_plane);
        std::copy(b.hr_target.begin(), b.hr_target.end(),
                  out.target.data.begin() + static_cast<std::size_t>(s) * hr_plane);
    }
    return out;
}

ad::Var BatchTensors::gen_input(std::uint64_t noise_seed, int member) const {
    const int n = predictors.dim(0), h = predictors.dim(2), w = predictors.dim(3);
    Tensor full({n, 9 + noise_channels, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int s = 0; s < n; ++s) {
        std::copy(predictors.data.begin() + static_cast<std::size_t>(s) * 9 * plane,
                  predictors.data.begin() + static_cast<std::size_t>(s + 1) * 9 * plane,
                  full.data.begin() + static_cast<std::size_t>(s) * (9 + noise_channels) * plane);
        SplitMix64 rng(mix_seed(noise_seed, static_cast<std::uint64_t>(member),
                                static_cast<std::uint64_t>(s)));
        double* noise =
            full.data.data() + (static_cast<std::size_t>(s) * (9 + noise_channels) + 9) * plane;
        for (std::size_t k = 0; k < static_cast<std::size_t>(noise_channels) * plane; ++k) {
            noise[k] = rng.normal();
        }
    }
    return Var::constant(std::move(full));
}

ad::Var square(const Var& x) { return ad::mul(x, x); }

ad::Var content_loss(const std::vector<Var>& members, const Var& target) {
    require(!members.empty(), "content loss: empty ensemble");
    Var mean = members[0];
    for (std::size_t i = 1; i < members.size(); ++i) mean = ad::add(mean, members[i]);
    mean = ad::scale(mean, 1.0 / static_cast<double>(members.size()));
    return ad::mean_all(square(ad::sub(mean, target)));
}

ad::Var gradient_penalty(const std::function<Var(const Var&)>& critic_fn, const Tensor& real,
                         const Tensor& fake, std::uint64_t eps_seed) {
    require(real.shape == fake.shape, "gradient penalty: real/fake shape mismatch");
    require(real.shape.size() == 4, "gradient penalty: expected [N,1,H,W]");
    const int n = real.dim(0);
    const std::size_t per = real.numel() / static_cast<std::size_t>(n);

    Tensor mix = real;
    for (int s = 0; s < n; ++s) {
        SplitMix64 rng(mix_seed(eps_seed, 0x657073 /*"eps"*/, static_cast<std::uint64_t>(s)));
        const double eps = rng.uniform();
        for (std::size_t k = 0; k < per; ++k) {
            const std::size_t i = static_cast<std::size_t>(s) * per + k;
            mix.data[i] = eps * real.data[i] + (1.0 - eps) * fake.data[i];
        }
    }

    Var x_hat = Var::leaf(std::move(mix), true);
    Var scores = critic_fn(x_hat);
    require(scores.val().shape.size() == 1 && scores.val().dim(0) == n,
            "gradient penalty: critic must return one score per sample");

    // Per-sample input gradients; scores are independent across samples, so
    // differentiating their sum recovers each sample's own gradient.
    const ad::GradMap grads = ad::backward(ad::sum_all(scores));
    Var g = ad::grad_of(grads, x_hat);
    Var norm = ad::vsqrt(ad::reduce_chw(square(g)));  // [N]
    return ad::mean_over_batch(square(ad::add_scalar(norm, -1.0)));
}

Generator detached_copy(const Generator& gen) {
    Generator copy = gen;
    for (auto& p : copy.params()) p.var = Var::constant(p.var.val());
    return copy;
}

Critic detached_copy(const Critic& critic) {
    Critic copy = critic;
    for (auto& p : copy.params()) p.var = Var::constant(p.var.val());
    return copy;
}

ad::Var critic_loss(const Generator& gen, const Critic& critic, const BatchTensors& batch,
                    const TrainConfig& cfg, const LossSeeds& seeds) {
    const Generator frozen_gen = detached_copy(gen);
    const Var fake_graph =
        frozen_gen.forward(batch.gen_input(seeds.noise, 0), batch.statics_var());
    const Var fake = Var::constant(fake_graph.val());
    const Var cond = batch.conditioning();
    const Var statics = batch.statics_var();

    const Var score_fake = critic.forward(fake, cond, statics);
    const Var score_real = critic.forward(batch.target_var(), cond, statics);

    const auto critic_fn = [&](const Var& x) { return critic.forward(x, cond, statics); };
    const Var gp = gradient_penalty(critic_fn, batch.target, fake.val(), seeds.eps);

    return ad::add(ad::sub(ad::mean_over_batch(score_fake), ad::mean_over_batch(score_real)),
                   ad::scale(gp, cfg.gp_weight));
}

ad::Var generator_loss(const Generator& gen, const Critic& critic, const BatchTensors& batch,
                       const TrainConfig& cfg, const LossSeeds& seeds) {
    require(cfg.content_ensemble >= 1, "generator loss: ensemble size must be >= 1");
    const Critic frozen_critic = detached_copy(critic);
    const Var statics = batch.statics_var();

    std::vector<Var> members;
    members.reserve(cfg.content_ensemble);
    for (int m = 0; m < cfg.content_ensemble; ++m) {
        members.push_back(gen.forward(batch.gen_input(seeds.noise, m), statics));
    }
    // The content ensemble is excluded from the adversarial term: the critic
    // sees one fake per batch element.
    const Var adv = ad::mean_over_batch(frozen_critic.forward(members[0], batch.conditioning(),
                                                              statics));
    const Var content = content_loss(members, batch.target_var());
    return ad::add(ad::neg(adv), ad::scale(content, cfg.content_weight));
}

}  // namespace dsc
