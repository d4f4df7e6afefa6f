#include "downscale/nn.hpp"

#include <cmath>

#include "downscale/error.hpp"
#include "downscale/rng.hpp"

namespace dsc {

using ad::Var;

ad::Var activation_fn(const std::string& kind, const ad::Var& x) {
    if (kind == "softplus") return ad::softplus(x);
    if (kind == "leaky_relu") return ad::leaky_relu(x, 0.2);
    if (kind == "tanh") return ad::vtanh(x);
    throw Error("unknown activation: " + kind);
}

ad::Var upsample_2p5(const ad::Var& x) { return ad::avgpool2(ad::upsample_nn(x, 5)); }

namespace {

Tensor he_normal(std::vector<int> shape, int fan_in, std::uint64_t seed) {
    Tensor t(std::move(shape));
    SplitMix64 rng(seed);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = sd * rng.normal();
    return t;
}

struct ParamBuilder {
    std::vector<Param>& params;
    std::uint64_t seed;
    int counter = 0;

    Var conv(const std::string& name, int c_in, int c_out, int k = 3) {
        Var w = Var::leaf(he_normal({c_out, c_in, k, k}, c_in * k * k, mix_seed(seed, ++counter)),
                          true);
        params.push_back({name + ".w", w});
        return w;
    }
    Var bias(const std::string& name, int c) {
        Var b = Var::leaf(Tensor::zeros({c}), true);
        params.push_back({name + ".b", b});
        return b;
    }
    Var dense(const std::string& name, int in, int out) {
        Var w = Var::leaf(he_normal({in, out}, in, mix_seed(seed, ++counter)), true);
        params.push_back({name + ".w", w});
        return w;
    }
};

struct ConvLayer {
    Var w, b;
    Var apply(const Var& x) const { return ad::bias_add(ad::conv2d(x, w), b); }
};

ConvLayer make_conv(ParamBuilder& pb, const std::string& name, int c_in, int c_out) {
    ConvLayer l;
    l.w = pb.conv(name, c_in, c_out);
    l.b = pb.bias(name, c_out);
    return l;
}

// y = x + conv2(act(conv1(x)))
struct ResBlock {
    ConvLayer conv1, conv2;
    std::string act;
    Var apply(const Var& x) const {
        Var t = activation_fn(act, conv1.apply(x));
        return ad::add(x, conv2.apply(t));
    }
};

ResBlock make_res(ParamBuilder& pb, const std::string& name, int filters,
                  const std::string& act) {
    return {make_conv(pb, name + ".conv1", filters, filters),
            make_conv(pb, name + ".conv2", filters, filters), act};
}

// Parameter layout is fixed by construction order; forward passes look
// layers up by index through these small plans.
struct GenPlan {
    ConvLayer in;
    std::vector<ResBlock> lr_blocks;
    ConvLayer merge;
    ResBlock hr_block;
    ConvLayer out;
};

struct CriticPlan {
    ConvLayer in;
    std::vector<ResBlock> blocks;
    Var dense1_w, dense1_b;
    Var dense2_w, dense2_b;
};

GenPlan build_generator(ParamBuilder& pb, const GeneratorConfig& cfg) {
    GenPlan p;
    const int f = cfg.filters;
    p.in = make_conv(pb, "gen.in", 9 + cfg.noise_channels, f);
    for (int i = 0; i < cfg.residual_blocks; ++i) {
        p.lr_blocks.push_back(make_res(pb, "gen.res" + std::to_string(i), f, cfg.activation));
    }
    p.merge = make_conv(pb, "gen.merge", cfg.use_static_inputs ? f + 2 : f, f);
    p.hr_block = make_res(pb, "gen.hr", f, cfg.activation);
    p.out = make_conv(pb, "gen.out", f, 1);
    return p;
}

CriticPlan build_critic(ParamBuilder& pb, const CriticConfig& cfg) {
    CriticPlan p;
    const int f = cfg.filters;
    const int c_in = 1 + 9 + (cfg.use_static_inputs ? 2 : 0);
    p.in = make_conv(pb, "critic.in", c_in, f);
    for (int i = 0; i < cfg.residual_blocks; ++i) {
        p.blocks.push_back(make_res(pb, "critic.res" + std::to_string(i), f, cfg.activation));
    }
    p.dense1_w = pb.dense("critic.dense1", f, f);
    p.dense1_b = pb.bias("critic.dense1", f);
    p.dense2_w = pb.dense("critic.dense2", f, 1);
    p.dense2_b = pb.bias("critic.dense2", 1);
    return p;
}

}  // namespace

Generator::Generator(const GeneratorConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    require(cfg.filters > 0, "generator: filters must be positive");
    require(cfg.residual_blocks >= 0 && cfg.noise_channels >= 0, "generator: bad config");
    ParamBuilder pb{params_, mix_seed(init_seed, 0x67656e /*"gen"*/)};
    build_generator(pb, cfg_);
}

ad::Var Generator::forward(const ad::Var& lr, const ad::Var& statics) const {
    require(lr.val().shape.size() == 4 && lr.val().dim(1) == 9 + cfg_.noise_channels,
            "generator: expected " + std::to_string(9 + cfg_.noise_channels) +
                " LR channels, got " + lr.val().shape_str());

    // Plan views over the stored parameters, in construction order.
    std::size_t idx = 0;
    auto next = [&]() -> const Var& { return params_[idx++].var; };
    ConvLayer in{next(), next()};
    std::vector<ResBlock> lr_blocks;
    for (int i = 0; i < cfg_.residual_blocks; ++i) {
        ResBlock b{{next(), next()}, {next(), next()}, cfg_.activation};
        lr_blocks.push_back(b);
    }
    ConvLayer merge{next(), next()};
    ResBlock hr_block{{next(), next()}, {next(), next()}, cfg_.activation};
    ConvLayer out{next(), next()};
    require(idx == params_.size(), "generator: parameter layout mismatch");

    Var h = activation_fn(cfg_.activation, in.apply(lr));
    for (const auto& b : lr_blocks) h = b.apply(h);
    h = upsample_2p5(h);
    if (cfg_.use_static_inputs) {
        require(statics.defined() && statics.val().dim(1) == 2 &&
                    statics.val().dim(2) == h.val().dim(2) &&
                    statics.val().dim(3) == h.val().dim(3),
                "generator: statics shape mismatch");
        h = ad::concat_ch({h, statics});
    }
    h = activation_fn(cfg_.activation, merge.apply(h));
    h = hr_block.apply(h);
    return out.apply(h);
}

Critic::Critic(const CriticConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    require(cfg.filters > 0, "critic: filters must be positive");
    ParamBuilder pb{params_, mix_seed(init_seed, 0x637269 /*"cri"*/)};
    build_critic(pb, cfg_);
}

ad::Var Critic::forward(const ad::Var& candidate, const ad::Var& lr,
                        const ad::Var& statics) const {
    require(candidate.val().shape.size() == 4 && candidate.val().dim(1) == 1,
            "critic: candidate must be [N,1,H,W]");
    require(lr.val().shape.size() == 4 && lr.val().dim(1) == 9,
            "critic: expected 9 LR predictor channels, got " + lr.val().shape_str());
    require(candidate.val().dim(2) == lr.val().dim(2) * 5 / 2 &&
                candidate.val().dim(3) == lr.val().dim(3) * 5 / 2,
            "critic: candidate is not 2.5x the LR shape");

    std::size_t idx = 0;
    auto next = [&]() -> const Var& { return params_[idx++].var; };
    ConvLayer in{next(), next()};
    std::vector<ResBlock> blocks;
    for (int i = 0; i < cfg_.residual_blocks; ++i) {
        ResBlock b{{next(), next()}, {next(), next()}, cfg_.activation};
        blocks.push_back(b);
    }
    Var d1w = next(), d1b = next(), d2w = next(), d2b = next();
    require(idx == params_.size(), "critic: parameter layout mismatch");

    std::vector<Var> stack{candidate, upsample_2p5(lr)};
    if (cfg_.use_static_inputs) {
        require(statics.defined() && statics.val().dim(1) == 2, "critic: statics shape mismatch");
        stack.push_back(statics);
    }
    Var h = activation_fn(cfg_.activation, in.apply(ad::concat_ch(stack)));
    for (const auto& b : blocks) {
        h = b.apply(h);
        if (h.val().dim(2) % 2 == 0 && h.val().dim(3) % 2 == 0 && h.val().dim(2) >= 4 &&
            h.val().dim(3) >= 4) {
            h = ad::avgpool2(h);
        }
    }
    const double inv_hw = 1.0 / static_cast<double>(h.val().dim(2) * h.val().dim(3));
    Var pooled = ad::scale(ad::reduce_hw(h), inv_hw);  // [N, F]
    Var d1 = activation_fn(cfg_.activation, ad::bias_add_vec(ad::matmul(pooled, d1w), d1b));
    Var d2 = ad::bias_add_vec(ad::matmul(d1, d2w), d2b);  // [N, 1]
    return ad::reshape(d2, {d2.val().dim(0)});
}

std::size_t total_parameters(const std::vector<Param>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.var.val().numel();
    return n;
}

}  // namespace dsc
