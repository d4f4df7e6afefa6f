#pragma once

#include <optional>
#include <string>
#include <vector>

#include "downscale/losses.hpp"
#include "downscale/nn.hpp"
#include "downscale/store.hpp"
#include "downscale/transform.hpp"

namespace dsc {

class Adam {
public:
    Adam(double lr, double beta1, double beta2, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Param>& params, const ad::GradMap& grads);

    std::int64_t t() const { return t_; }
    const std::vector<Tensor>& m() const { return m_; }
    const std::vector<Tensor>& v() const { return v_; }
    void restore(std::int64_t t, std::vector<Tensor> m, std::vector<Tensor> v);

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct TrainSetup {
    GeneratorConfig gen;
    CriticConfig critic;
    TrainConfig train;

    std::string to_json() const;
    static TrainSetup from_json(const std::string& text);
    static TrainSetup from_json_file(const std::string& path);
    std::uint64_t config_hash() const;
};

// Self-describing binary checkpoint: configs, parameter tensors for both
// networks, Adam state, step counter and validation CRPS. Reloading
// reproduces forward outputs bit-identically.
struct Checkpoint {
    TrainSetup setup;
    std::int64_t step = 0;
    int epoch = 0;
    double val_crps = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<std::string, Tensor>> gen_params;
    std::vector<std::pair<std::string, Tensor>> critic_params;
    std::int64_t gen_opt_t = 0, critic_opt_t = 0;
    std::vector<Tensor> gen_m, gen_v, critic_m, critic_v;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Restores the generator (and optionally critic) parameters from a checkpoint.
Generator generator_from_checkpoint(const Checkpoint& ck);

struct TrainResult {
    std::vector<std::string> epoch_files;
    std::string best_file;  // lowest validation CRPS among saved epochs
    std::vector<double> critic_losses;
    std::vector<double> gen_losses;
    std::vector<double> val_crps_per_epoch;
    bool aborted = false;
    std::string abort_reason;
};

// Alternates critic_steps_per_gen critic updates with one generator update,
// checkpoints each epoch with a validation CRPS (every 24th validation hour,
// 8 members), and returns the per-epoch series plus the selected best file.
// Non-finite losses abort, retaining the last good checkpoint. Fully seeded.
TrainResult train_model(const Store& store, const Region& region, const NormStats& stats,
                        const TrainSetup& setup, const HourRange& train_hours,
                        const HourRange& val_hours, const std::string& out_dir);

// One stacked batch drawn deterministically from the training range; exposed
// for the determinism tests.
BatchTensors sample_training_batch(const Store& store, const Region& region,
                                   const NormStats& stats, const TrainSetup& setup,
                                   const HourRange& train_hours, std::uint64_t seed);

}  // namespace dsc
