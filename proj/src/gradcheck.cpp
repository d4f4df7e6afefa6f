#include "downscale/gradcheck.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "downscale/error.hpp"
#include "downscale/rng.hpp"

namespace dsc {

using ad::Var;

GradCheckConfig GradCheckConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "gradcheck: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    GradCheckConfig c;
    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        c.gen.filters = g.value("filters", c.gen.filters);
        c.gen.residual_blocks = g.value("residual_blocks", c.gen.residual_blocks);
        c.gen.noise_channels = g.value("noise_channels", c.gen.noise_channels);
        c.gen.use_static_inputs = g.value("use_static_inputs", c.gen.use_static_inputs);
        c.gen.activation = g.value("activation", c.gen.activation);
    }
    if (j.contains("critic")) {
        const auto& k = j.at("critic");
        c.critic.filters = k.value("filters", c.critic.filters);
        c.critic.residual_blocks = k.value("residual_blocks", c.critic.residual_blocks);
        c.critic.use_static_inputs = k.value("use_static_inputs", c.critic.use_static_inputs);
        c.critic.activation = k.value("activation", c.critic.activation);
    }
    c.lr_h = j.value("lr_h", c.lr_h);
    c.lr_w = j.value("lr_w", c.lr_w);
    c.batch = j.value("batch", c.batch);
    c.seed = j.value("seed", c.seed);
    c.fd_step = j.value("fd_step", c.fd_step);
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train").dump());
    return c;
}

namespace {

BatchTensors random_batch(const GradCheckConfig& cfg) {
    const int n = cfg.batch, h = cfg.lr_h, w = cfg.lr_w;
    require(h % 2 == 0 && w % 2 == 0, "gradcheck: LR dims must be even for the 2.5x path");
    const int hh = h * 5 / 2, hw = w * 5 / 2;
    BatchTensors b;
    b.noise_channels = cfg.gen.noise_channels;
    b.predictors = Tensor({n, 9, h, w});
    b.statics = Tensor({n, 2, hh, hw});
    b.target = Tensor({n, 1, hh, hw});
    SplitMix64 rng(mix_seed(cfg.seed, 0x67636261));
    for (double& v : b.predictors.data) v = rng.normal();
    for (double& v : b.statics.data) v = rng.normal();
    for (double& v : b.target.data) v = rng.normal();
    return b;
}

struct LossEval {
    std::function<double()> value;          // rebuilds the loss with fixed seeds
    std::function<Var()> graph;             // same, returning the Var
};

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Central differences over every parameter of `params`.
double check_params(std::vector<Param>& params, const LossEval& loss, double fd_step,
                    std::size_t* checked) {
    const Var root = loss.graph();
    const ad::GradMap grads = ad::backward(root);

    std::vector<double> analytic;
    std::vector<double*> slots;
    for (auto& p : params) {
        const Var g = ad::grad_of(grads, p.var);
        for (std::size_t k = 0; k < g.val().numel(); ++k) {
            analytic.push_back(g.val().data[k]);
            slots.push_back(&p.var.val_mut().data[k]);
        }
    }

    std::vector<double> fd(analytic.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        double& theta = *slots[i];
        const double orig = theta;
        const double h = fd_step * std::max(1.0, std::abs(orig));
        theta = orig + h;
        const double up = loss.value();
        theta = orig - h;
        const double down = loss.value();
        theta = orig;
        fd[i] = (up - down) / (2.0 * h);
    }

    const double g_max = std::max(max_abs(analytic), max_abs(fd));
    const double floor = std::max(1e-3 * g_max, 1e-12);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
    }
    *checked = analytic.size();
    return worst;
}

}  // namespace

GradCheckReport grad_check(const GradCheckConfig& cfg) {
    Generator gen(cfg.gen, cfg.seed);
    Critic critic(cfg.critic, mix_seed(cfg.seed, 0x63726974));
    const BatchTensors batch = random_batch(cfg);

    TrainConfig tc = cfg.train;
    // A small content ensemble keeps the per-parameter FD affordable while the
    // loss formula is unchanged.
    tc.content_ensemble = std::min(tc.content_ensemble, 2);
    const LossSeeds seeds{mix_seed(cfg.seed, 11), mix_seed(cfg.seed, 12)};

    GradCheckReport report;
    {
        LossEval eval{
            [&]() { return critic_loss(gen, critic, batch, tc, seeds).val().data[0]; },
            [&]() { return critic_loss(gen, critic, batch, tc, seeds); }};
        report.max_rel_err_critic =
            check_params(critic.params(), eval, cfg.fd_step, &report.critic_params_checked);
    }
    {
        LossEval eval{
            [&]() { return generator_loss(gen, critic, batch, tc, seeds).val().data[0]; },
            [&]() { return generator_loss(gen, critic, batch, tc, seeds); }};
        report.max_rel_err_gen =
            check_params(gen.params(), eval, cfg.fd_step, &report.gen_params_checked);
    }
    return report;
}

}  // namespace dsc
