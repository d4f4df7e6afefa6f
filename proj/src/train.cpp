#include "downscale/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "downscale/ensemble.hpp"
#include "downscale/error.hpp"
#include "downscale/rng.hpp"
#include "downscale/score.hpp"

namespace dsc {

using ad::Var;
using nlohmann::json;

void Adam::step(std::vector<Param>& params, const ad::GradMap& grads) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.push_back(Tensor::zeros(p.var.val().shape));
            v_.push_back(Tensor::zeros(p.var.val().shape));
        }
    }
    require(m_.size() == params.size(), "adam: parameter count changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Var g = ad::grad_of(grads, params[i].var);
        Tensor& theta = params[i].var.val_mut();
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t k = 0; k < theta.numel(); ++k) {
            const double gk = g.val().data[k];
            m.data[k] = beta1_ * m.data[k] + (1.0 - beta1_) * gk;
            v.data[k] = beta2_ * v.data[k] + (1.0 - beta2_) * gk * gk;
            const double mhat = m.data[k] / bc1;
            const double vhat = v.data[k] / bc2;
            theta.data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::restore(std::int64_t t, std::vector<Tensor> m, std::vector<Tensor> v) {
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

namespace {

json gen_cfg_json(const GeneratorConfig& c) {
    return {{"filters", c.filters},
            {"residual_blocks", c.residual_blocks},
            {"noise_channels", c.noise_channels},
            {"use_static_inputs", c.use_static_inputs},
            {"activation", c.activation}};
}

GeneratorConfig gen_cfg_from(const json& j) {
    GeneratorConfig c;
    c.filters = j.value("filters", c.filters);
    c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
    c.noise_channels = j.value("noise_channels", c.noise_channels);
    c.use_static_inputs = j.value("use_static_inputs", c.use_static_inputs);
    c.activation = j.value("activation", c.activation);
    return c;
}

json critic_cfg_json(const CriticConfig& c) {
    return {{"filters", c.filters},
            {"residual_blocks", c.residual_blocks},
            {"use_static_inputs", c.use_static_inputs},
            {"activation", c.activation}};
}

CriticConfig critic_cfg_from(const json& j) {
    CriticConfig c;
    c.filters = j.value("filters", c.filters);
    c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
    c.use_static_inputs = j.value("use_static_inputs", c.use_static_inputs);
    c.activation = j.value("activation", c.activation);
    return c;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

std::string TrainSetup::to_json() const {
    json j;
    j["generator"] = gen_cfg_json(gen);
    j["critic"] = critic_cfg_json(critic);
    j["train"] = json::parse(train.to_json());
    return j.dump(2) + "\n";
}

TrainSetup TrainSetup::from_json(const std::string& text) {
    json j = json::parse(text);
    TrainSetup s;
    if (j.contains("generator")) s.gen = gen_cfg_from(j.at("generator"));
    if (j.contains("critic")) s.critic = critic_cfg_from(j.at("critic"));
    if (j.contains("train")) s.train = TrainConfig::from_json(j.at("train").dump());
    require(s.gen.use_static_inputs == s.critic.use_static_inputs,
            "train setup: generator and critic must agree on static inputs");
    return s;
}

TrainSetup TrainSetup::from_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "train setup: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

std::uint64_t TrainSetup::config_hash() const { return fnv1a64(to_json()); }

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}
void write_i64(std::ofstream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
}
void write_f64(std::ofstream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_string(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_tensor(std::ofstream& out, const Tensor& t) {
    write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * 8));
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::int64_t read_i64(std::ifstream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
double read_f64(std::ifstream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
std::string read_string(std::ifstream& in) {
    const std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}
Tensor read_tensor(std::ifstream& in) {
    const std::uint32_t rank = read_u32(in);
    require(rank >= 1 && rank <= 4, "checkpoint: bad tensor rank");
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_u32(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * 8));
    return t;
}

void write_named_tensors(std::ofstream& out,
                         const std::vector<std::pair<std::string, Tensor>>& ts) {
    write_u32(out, static_cast<std::uint32_t>(ts.size()));
    for (const auto& [name, t] : ts) {
        write_string(out, name);
        write_tensor(out, t);
    }
}

std::vector<std::pair<std::string, Tensor>> read_named_tensors(std::ifstream& in) {
    const std::uint32_t n = read_u32(in);
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = read_string(in);
        out.emplace_back(std::move(name), read_tensor(in));
    }
    return out;
}

void write_tensor_list(std::ofstream& out, const std::vector<Tensor>& ts) {
    write_u32(out, static_cast<std::uint32_t>(ts.size()));
    for (const auto& t : ts) write_tensor(out, t);
}

std::vector<Tensor> read_tensor_list(std::ifstream& in) {
    const std::uint32_t n = read_u32(in);
    std::vector<Tensor> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(read_tensor(in));
    return out;
}

constexpr char kCkptMagic[4] = {'D', 'S', 'C', 'K'};

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "checkpoint: cannot write " + tmp);
        out.write(kCkptMagic, 4);
        write_u32(out, 1);  // version
        write_string(out, ck.setup.to_json());
        write_i64(out, static_cast<std::int64_t>(ck.setup.config_hash()));
        write_i64(out, ck.step);
        write_u32(out, static_cast<std::uint32_t>(ck.epoch));
        write_f64(out, ck.val_crps);
        write_named_tensors(out, ck.gen_params);
        write_named_tensors(out, ck.critic_params);
        write_i64(out, ck.gen_opt_t);
        write_tensor_list(out, ck.gen_m);
        write_tensor_list(out, ck.gen_v);
        write_i64(out, ck.critic_opt_t);
        write_tensor_list(out, ck.critic_m);
        write_tensor_list(out, ck.critic_v);
        require(out.good(), "checkpoint: short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, kCkptMagic, 4) == 0,
            "checkpoint: bad magic in " + path);
    require(read_u32(in) == 1, "checkpoint: unsupported version in " + path);
    Checkpoint ck;
    const std::string setup_json = read_string(in);
    ck.setup = TrainSetup::from_json(setup_json);
    const std::uint64_t stored_hash = static_cast<std::uint64_t>(read_i64(in));
    require(stored_hash == ck.setup.config_hash(), "checkpoint: config hash mismatch in " + path);
    ck.step = read_i64(in);
    ck.epoch = static_cast<int>(read_u32(in));
    ck.val_crps = read_f64(in);
    ck.gen_params = read_named_tensors(in);
    ck.critic_params = read_named_tensors(in);
    ck.gen_opt_t = read_i64(in);
    ck.gen_m = read_tensor_list(in);
    ck.gen_v = read_tensor_list(in);
    ck.critic_opt_t = read_i64(in);
    ck.critic_m = read_tensor_list(in);
    ck.critic_v = read_tensor_list(in);
    require(in.good(), "checkpoint: truncated file " + path);
    return ck;
}

namespace {

void restore_params(std::vector<Param>& params,
                    const std::vector<std::pair<std::string, Tensor>>& stored) {
    require(params.size() == stored.size(), "checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(params[i].name == stored[i].first, "checkpoint: parameter name mismatch at " +
                                                       params[i].name);
        require(params[i].var.val().shape == stored[i].second.shape,
                "checkpoint: parameter shape mismatch at " + params[i].name);
        params[i].var.val_mut() = stored[i].second;
    }
}

std::vector<std::pair<std::string, Tensor>> snapshot_params(const std::vector<Param>& params) {
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.name, p.var.val());
    return out;
}

}  // namespace

Generator generator_from_checkpoint(const Checkpoint& ck) {
    Generator gen(ck.setup.gen, /*init_seed=*/ck.setup.train.seed);
    restore_params(gen.params(), ck.gen_params);
    return gen;
}

BatchTensors sample_training_batch(const Store& store, const Region& region,
                                   const NormStats& stats, const TrainSetup& setup,
                                   const HourRange& train_hours, std::uint64_t seed) {
    std::vector<TrainingBatch> samples;
    samples.reserve(setup.train.batch_size);
    for (int e = 0; e < setup.train.batch_size; ++e) {
        bool found = false;
        for (std::uint64_t attempt = 0; attempt < 64 && !found; ++attempt) {
            const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(e), attempt);
            const PatchCoords patch = sample_patch(store.lr_grid(), store.hr_grid(), region,
                                                    setup.train.lr_patch, s);
            SplitMix64 rng(mix_seed(s, 0x74696d65 /*"time"*/));
            const EpochHour t =
                train_hours.begin + static_cast<EpochHour>(rng.below(
                                        static_cast<std::uint64_t>(train_hours.count())));
            if (!batch_window_clean(store, patch, t)) continue;
            samples.push_back(make_batch(store, stats, patch, t, setup.gen.noise_channels, s));
            found = true;
        }
        require(found, "training: could not find a clean batch window after 64 attempts");
    }
    return BatchTensors::stack(samples);
}

namespace {

double validation_crps(const Store& store, const Region& region, const NormStats& stats,
                       const Generator& gen, const HourRange& val_hours) {
    // Fixed protocol: every 24th validation hour, 8 members.
    constexpr int kStride = 24;
    constexpr int kMembers = 8;
    std::vector<double> pixel_means;
    for (const auto& member : region.members) {
        const IndexBox hr_box = slice_one(store.hr_grid(), member);
        const IndexBox lr_box = lr_box_for(store.lr_grid(), store.hr_grid(), hr_box);
        const ScoreGrid sg = score_region(
            store, member, hr_box, val_hours, kStride, [&](EpochHour t) {
                return sample_ensemble(gen, stats, store, lr_box, hr_box, t, kMembers,
                                       mix_seed(0x76616c63 /*"valc"*/, static_cast<std::uint64_t>(t)))
                    .members;
            });
        for (std::size_t k = 0; k < sg.mean_crps.size(); ++k) {
            if (sg.hours_counted[k] > 0) pixel_means.push_back(sg.mean_crps[k]);
        }
    }
    require(!pixel_means.empty(), "validation: no scored pixels");
    return pairwise_sum(pixel_means) / static_cast<double>(pixel_means.size());
}

}  // namespace

TrainResult train_model(const Store& store, const Region& region, const NormStats& stats,
                        const TrainSetup& setup, const HourRange& train_hours,
                        const HourRange& val_hours, const std::string& out_dir) {
    require(!train_hours.empty() && !val_hours.empty(), "training: empty hour ranges");
    std::filesystem::create_directories(out_dir);

    const TrainConfig& tc = setup.train;
    Generator gen(setup.gen, tc.seed);
    Critic critic(setup.critic, mix_seed(tc.seed, 0x63726974));
    Adam opt_gen(tc.lr_gen, tc.adam_beta1, tc.adam_beta2);
    Adam opt_critic(tc.lr_critic, tc.adam_beta1, tc.adam_beta2);

    TrainResult result;
    std::int64_t step_counter = 0;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        for (int step = 0; step < tc.steps_per_epoch; ++step) {
            for (int k = 0; k < tc.critic_steps_per_gen; ++k) {
                const std::uint64_t s =
                    mix_seed(tc.seed, static_cast<std::uint64_t>(epoch),
                             static_cast<std::uint64_t>(step), 0x100 + static_cast<std::uint64_t>(k));
                const BatchTensors batch =
                    sample_training_batch(store, region, stats, setup, train_hours, s);
                const LossSeeds seeds{mix_seed(s, 1), mix_seed(s, 2)};
                const Var loss = critic_loss(gen, critic, batch, tc, seeds);
                const double lv = loss.val().data[0];
                if (!std::isfinite(lv)) {
                    result.aborted = true;
                    result.abort_reason = "non-finite critic loss at epoch " +
                                          std::to_string(epoch) + " step " + std::to_string(step);
                    return result;
                }
                const ad::GradMap grads = ad::backward(loss);
                opt_critic.step(critic.params(), grads);
                result.critic_losses.push_back(lv);
                ++step_counter;
            }
            {
                const std::uint64_t s = mix_seed(tc.seed, static_cast<std::uint64_t>(epoch),
                                                 static_cast<std::uint64_t>(step), 0x200);
                const BatchTensors batch =
                    sample_training_batch(store, region, stats, setup, train_hours, s);
                const LossSeeds seeds{mix_seed(s, 1), mix_seed(s, 2)};
                const Var loss = generator_loss(gen, critic, batch, tc, seeds);
                const double lv = loss.val().data[0];
                if (!std::isfinite(lv)) {
                    result.aborted = true;
                    result.abort_reason = "non-finite generator loss at epoch " +
                                          std::to_string(epoch) + " step " + std::to_string(step);
                    return result;
                }
                const ad::GradMap grads = ad::backward(loss);
                opt_gen.step(gen.params(), grads);
                result.gen_losses.push_back(lv);
                ++step_counter;
            }
        }

        const double val = validation_crps(store, region, stats, gen, val_hours);
        result.val_crps_per_epoch.push_back(val);

        Checkpoint ck;
        ck.setup = setup;
        ck.step = step_counter;
        ck.epoch = epoch;
        ck.val_crps = val;
        ck.gen_params = snapshot_params(gen.params());
        ck.critic_params = snapshot_params(critic.params());
        ck.gen_opt_t = opt_gen.t();
        ck.gen_m = opt_gen.m();
        ck.gen_v = opt_gen.v();
        ck.critic_opt_t = opt_critic.t();
        ck.critic_m = opt_critic.m();
        ck.critic_v = opt_critic.v();
        const std::string file = out_dir + "/ckpt_epoch_" + std::to_string(epoch) + ".bin";
        save_checkpoint(ck, file);
        result.epoch_files.push_back(file);
    }

    // Checkpoint selection: lowest validation CRPS across saved epochs.
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.val_crps_per_epoch.size(); ++i) {
        if (result.val_crps_per_epoch[i] < result.val_crps_per_epoch[best]) best = i;
    }
    result.best_file = result.epoch_files[best];
    const std::string best_copy = out_dir + "/ckpt_best.bin";
    std::filesystem::copy_file(result.best_file, best_copy,
                               std::filesystem::copy_options::overwrite_existing);
    result.best_file = best_copy;
    return result;
}

}  // namespace dsc
