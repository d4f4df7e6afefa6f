#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "downscale/autodiff.hpp"
#include "downscale/batch.hpp"
#include "downscale/nn.hpp"

namespace dsc {

struct TrainConfig {
    double lr_gen = 0.005;
    double lr_critic = 0.0005;
    double content_weight = 300.0;  // lambda_c
    double gp_weight = 10.0;        // lambda_gp
    int content_ensemble = 8;       // n
    int epochs = 5;
    int critic_steps_per_gen = 5;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.9;
    int batch_size = 8;
    int steps_per_epoch = 50;
    int lr_patch = 32;
    std::uint64_t seed = 1;

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

// A stacked mini-batch in model space. Predictors and targets are normalized;
// noise channels are drawn on demand so ensemble members share everything but
// the noise.
struct BatchTensors {
    Tensor predictors;  // [N, 9, h, w]
    Tensor statics;     // [N, 2, H, W]
    Tensor target;      // [N, 1, H, W]
    int noise_channels = 0;

    static BatchTensors stack(std::span<const TrainingBatch> samples);

    ad::Var gen_input(std::uint64_t noise_seed, int member) const;
    ad::Var conditioning() const { return ad::Var::constant(predictors); }
    ad::Var statics_var() const { return ad::Var::constant(statics); }
    ad::Var target_var() const { return ad::Var::constant(target); }
    int batch() const { return predictors.dim(0); }
};

// MSE between the ensemble mean and the target, over all pixels (and batch
// elements). members.size() must equal the configured ensemble size where the
// caller enforces it.
ad::Var content_loss(const std::vector<ad::Var>& members, const ad::Var& target);

// WGAN-GP penalty: x_hat = eps*real + (1-eps)*fake with per-sample
// eps ~ U(0,1) from eps_seed; returns mean over samples of
// (||d critic / d x_hat||_2 - 1)^2. The critic gradient is taken through the
// graph, so the penalty stays differentiable w.r.t. the critic parameters.
ad::Var gradient_penalty(const std::function<ad::Var(const ad::Var&)>& critic_fn,
                         const Tensor& real, const Tensor& fake, std::uint64_t eps_seed);

struct LossSeeds {
    std::uint64_t noise = 0;
    std::uint64_t eps = 0;
};

// critic loss = mean critic(fake) - mean critic(real) + gp_weight * GP,
// with the generator detached (one fake per batch element).
ad::Var critic_loss(const Generator& gen, const Critic& critic, const BatchTensors& batch,
                    const TrainConfig& cfg, const LossSeeds& seeds);

// generator loss = -mean critic(fake) + content_weight * content loss over
// the n-member ensemble sharing the batch conditioning; the critic is frozen.
ad::Var generator_loss(const Generator& gen, const Critic& critic, const BatchTensors& batch,
                       const TrainConfig& cfg, const LossSeeds& seeds);

// Parameter-sharing copies with detached (constant) parameters.
Generator detached_copy(const Generator& gen);
Critic detached_copy(const Critic& critic);

ad::Var square(const ad::Var& x);

}  // namespace dsc
