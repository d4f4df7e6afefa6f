#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "downscale/autodiff.hpp"

namespace dsc {

// ResNet-style fully convolutional generator. The 2.5x resolution step is
// structural: nearest-neighbor x5 followed by 2x2 average pooling, so LR and
// HR planes stay geographically aligned without interpolation.
struct GeneratorConfig {
    int filters = 128;
    int residual_blocks = 3;
    int noise_channels = 2;
    bool use_static_inputs = true;
    std::string activation = "softplus";
};

// Critic over (candidate HR, upsampled LR conditioning, statics): residual
// blocks with average pooling, then a dense head to one score per sample.
struct CriticConfig {
    int filters = 256;
    int residual_blocks = 3;
    bool use_static_inputs = true;
    std::string activation = "softplus";
};

struct Param {
    std::string name;
    ad::Var var;
};

ad::Var activation_fn(const std::string& kind, const ad::Var& x);

class Generator {
public:
    Generator(const GeneratorConfig& cfg, std::uint64_t init_seed);

    // lr: [N, 9 + noise_channels, h, w]; statics: [N, 2, 2.5h, 2.5w]
    // (ignored entirely when use_static_inputs is false). Returns
    // [N, 1, 2.5h, 2.5w] in normalized-log space.
    ad::Var forward(const ad::Var& lr, const ad::Var& statics) const;

    const GeneratorConfig& config() const { return cfg_; }
    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }

private:
    GeneratorConfig cfg_;
    std::vector<Param> params_;
};

class Critic {
public:
    Critic(const CriticConfig& cfg, std::uint64_t init_seed);

    // candidate: [N,1,H,W]; lr: [N,9,h,w] predictors only; statics: [N,2,H,W].
    // Returns [N] scores.
    ad::Var forward(const ad::Var& candidate, const ad::Var& lr, const ad::Var& statics) const;

    const CriticConfig& config() const { return cfg_; }
    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }

private:
    CriticConfig cfg_;
    std::vector<Param> params_;
};

// The fixed x2.5 path shared by the generator and the critic conditioning.
ad::Var upsample_2p5(const ad::Var& x);

std::size_t total_parameters(const std::vector<Param>& params);

}  // namespace dsc
