#pragma once

#include <cstdint>
#include <string>

#include "downscale/losses.hpp"

namespace dsc {

// Tiny-config comparison of analytic loss gradients against central finite
// differences, over every parameter of both networks (the critic loss
// includes the gradient-penalty path, so its check exercises the
// differentiate-through-a-gradient machinery).
struct GradCheckConfig {
    GeneratorConfig gen{.filters = 4, .residual_blocks = 1, .noise_channels = 2,
                        .use_static_inputs = true, .activation = "softplus"};
    CriticConfig critic{.filters = 4, .residual_blocks = 1, .use_static_inputs = true,
                        .activation = "softplus"};
    TrainConfig train;
    int lr_h = 4;
    int lr_w = 4;
    int batch = 2;
    std::uint64_t seed = 7;
    double fd_step = 1e-4;  // scaled by max(1, |theta|) per parameter

    static GradCheckConfig from_json_file(const std::string& path);
};

struct GradCheckReport {
    // max_i |analytic_i - fd_i| / max(|analytic_i|, |fd_i|, 1e-3 * g_max)
    // where g_max is the largest gradient magnitude of that loss.
    double max_rel_err_critic = 0.0;
    double max_rel_err_gen = 0.0;
    std::size_t critic_params_checked = 0;
    std::size_t gen_params_checked = 0;

    double max_rel_err() const { return std::max(max_rel_err_critic, max_rel_err_gen); }
};

GradCheckReport grad_check(const GradCheckConfig& cfg);

}  // namespace dsc
