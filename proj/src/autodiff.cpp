#include "downscale/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <unordered_set>

#include "downscale/error.hpp"

namespace dsc::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

std::shared_ptr<Node> make_node(Tensor value, std::vector<Var> inputs,
                                std::function<std::vector<Var>(const Var&)> vjp) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    for (const auto& in : inputs) {
        if (in.requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) {
        n->inputs = std::move(inputs);
        n->vjp = std::move(vjp);
    }
    return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    require(a.val().same_shape(b.val()), std::string(op) + ": shape mismatch " +
                                             a.val().shape_str() + " vs " + b.val().shape_str());
}

void check_rank4(const Var& a, const char* op) {
    require(a.val().shape.size() == 4, std::string(op) + ": expected rank-4 tensor, got " +
                                           a.val().shape_str());
}

}  // namespace

Var Var::leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
}

const Tensor& Var::val() const {
    require(node_ != nullptr, "autodiff: use of undefined Var");
    return node_->value;
}

Tensor& Var::val_mut() {
    require(node_ != nullptr, "autodiff: use of undefined Var");
    return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

GradMap backward(const Var& root) {
    require(root.defined() && root.val().numel() == 1,
            "backward: root must be a defined scalar");

    // Post-order DFS over the requires-grad part of the graph.
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    struct Frame {
        Node* n;
        std::size_t next = 0;
    };
    std::vector<Frame> stack;
    if (root.requires_grad()) {
        stack.push_back({root.raw()});
        seen.insert(root.raw());
    }
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->inputs.size()) {
            Node* child = f.n->inputs[f.next++].raw();
            if (child->requires_grad && !seen.count(child)) {
                seen.insert(child);
                stack.push_back({child});
            }
        } else {
            topo.push_back(f.n);
            stack.pop_back();
        }
    }

    GradMap grads;
    grads[root.raw()] = Var::constant(Tensor::full({1}, 1.0));
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        auto git = grads.find(n);
        if (git == grads.end() || !n->vjp) continue;
        const std::vector<Var> gxs = n->vjp(git->second);
        require(gxs.size() == n->inputs.size(), "backward: vjp arity mismatch");
        for (std::size_t i = 0; i < gxs.size(); ++i) {
            const Var& in = n->inputs[i];
            if (!in.requires_grad()) continue;
            require(gxs[i].val().same_shape(in.val()),
                    "backward: gradient shape " + gxs[i].val().shape_str() +
                        " does not match input " + in.val().shape_str());
            Var& slot = grads[in.raw()];
            slot = slot.defined() ? add(slot, gxs[i]) : gxs[i];
        }
    }
    return grads;
}

Var grad_of(const GradMap& grads, const Var& x) {
    auto it = grads.find(x.raw());
    if (it != grads.end()) return it->second;
    return Var::constant(Tensor::zeros(x.val().shape));
}

// ---------------- elementwise ----------------

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += b.val().data[i];
    return Var(make_node(std::move(out), {a, b},
                         [](const Var& gy) { return std::vector<Var>{gy, gy}; }));
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= b.val().data[i];
    return Var(make_node(std::move(out), {a, b},
                         [](const Var& gy) { return std::vector<Var>{gy, neg(gy)}; }));
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b.val().data[i];
    return Var(make_node(std::move(out), {a, b}, [a, b](const Var& gy) {
        return std::vector<Var>{mul(gy, b), mul(gy, a)};
    }));
}

Var vdiv(const Var& a, const Var& b) {
    check_same_shape(a, b, "vdiv");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] /= b.val().data[i];
    return Var(make_node(std::move(out), {a, b}, [a, b](const Var& gy) {
        Var ga = vdiv(gy, b);
        Var gb = neg(vdiv(mul(gy, a), mul(b, b)));
        return std::vector<Var>{ga, gb};
    }));
}

Var neg(const Var& a) {
    Tensor out = a.val();
    for (double& v : out.data) v = -v;
    return Var(make_node(std::move(out), {a},
                         [](const Var& gy) { return std::vector<Var>{neg(gy)}; }));
}

Var scale(const Var& a, double c) {
    Tensor out = a.val();
    for (double& v : out.data) v *= c;
    return Var(make_node(std::move(out), {a},
                         [c](const Var& gy) { return std::vector<Var>{scale(gy, c)}; }));
}

Var add_scalar(const Var& a, double c) {
    Tensor out = a.val();
    for (double& v : out.data) v += c;
    return Var(make_node(std::move(out), {a},
                         [](const Var& gy) { return std::vector<Var>{gy}; }));
}

Var mul_mask(const Var& a, const Tensor& mask) {
    require(a.val().same_shape(mask), "mul_mask: shape mismatch");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= mask.data[i];
    return Var(make_node(std::move(out), {a}, [mask](const Var& gy) {
        return std::vector<Var>{mul_mask(gy, mask)};
    }));
}

Var vexp(const Var& a) {
    Tensor out = a.val();
    for (double& v : out.data) v = std::exp(v);
    return Var(make_node(std::move(out), {a}, [a](const Var& gy) {
        return std::vector<Var>{mul(gy, vexp(a))};
    }));
}

Var vsqrt(const Var& a) {
    Tensor out = a.val();
    for (double& v : out.data) v = std::sqrt(v);
    return Var(make_node(std::move(out), {a}, [a](const Var& gy) {
        return std::vector<Var>{vdiv(gy, scale(vsqrt(a), 2.0))};
    }));
}

Var softplus(const Var& a) {
    Tensor out = a.val();
    for (double& v : out.data) v = v > 30.0 ? v : std::log1p(std::exp(v));
    return Var(make_node(std::move(out), {a}, [a](const Var& gy) {
        return std::vector<Var>{mul(gy, sigmoid(a))};
    }));
}

Var sigmoid(const Var& a) {
    Tensor out = a.val();
    for (double& v : out.data) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                            : std::exp(v) / (1.0 + std::exp(v));
    return Var(make_node(std::move(out), {a}, [a](const Var& gy) {
        Var s = sigmoid(a);
        return std::vector<Var>{mul(gy, mul(s, add_scalar(neg(s), 1.0)))};
    }));
}

Var vtanh(const Var& a) {
    Tensor out = a.val();
    for (double& v : out.data) v = std::tanh(v);
    return Var(make_node(std::move(out), {a}, [a](const Var& gy) {
        Var t = vtanh(a);
        return std::vector<Var>{mul(gy, add_scalar(neg(mul(t, t)), 1.0))};
    }));
}

Var leaky_relu(const Var& a, double alpha) {
    Tensor mask = a.val();
    for (double& v : mask.data) v = v > 0.0 ? 1.0 : alpha;
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= mask.data[i];
    return Var(make_node(std::move(out), {a}, [mask](const Var& gy) {
        return std::vector<Var>{mul_mask(gy, mask)};
    }));
}

// ---------------- reductions / broadcasts ----------------

Var sum_all(const Var& a) {
    double s = 0.0;
    for (double v : a.val().data) s += v;
    const std::vector<int> shape = a.val().shape;
    return Var(make_node(Tensor::scalar(s), {a}, [shape](const Var& gy) {
        return std::vector<Var>{broadcast_scalar(gy, shape)};
    }));
}

Var mean_all(const Var& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.val().numel()));
}

Var broadcast_scalar(const Var& s, std::vector<int> shape) {
    require(s.val().numel() == 1, "broadcast_scalar: source must be scalar");
    Tensor out = Tensor::full(shape, s.val().data[0]);
    return Var(make_node(std::move(out), {s}, [](const Var& gy) {
        return std::vector<Var>{sum_all(gy)};
    }));
}

Var reduce_chw(const Var& a) {
    check_rank4(a, "reduce_chw");
    const auto& sh = a.val().shape;
    const std::size_t per = a.val().numel() / sh[0];
    Tensor out({sh[0]});
    for (int n = 0; n < sh[0]; ++n) {
        double s = 0.0;
        for (std::size_t i = 0; i < per; ++i) s += a.val().data[n * per + i];
        out.data[n] = s;
    }
    const std::vector<int> shape = sh;
    return Var(make_node(std::move(out), {a}, [shape](const Var& gy) {
        return std::vector<Var>{expand_chw(gy, shape)};
    }));
}

Var expand_chw(const Var& a, std::vector<int> shape) {
    require(a.val().shape.size() == 1 && a.val().dim(0) == shape[0],
            "expand_chw: batch size mismatch");
    Tensor out(shape);
    const std::size_t per = out.numel() / shape[0];
    for (int n = 0; n < shape[0]; ++n) {
        const double v = a.val().data[n];
        for (std::size_t i = 0; i < per; ++i) out.data[n * per + i] = v;
    }
    return Var(make_node(std::move(out), {a}, [](const Var& gy) {
        return std::vector<Var>{reduce_chw(gy)};
    }));
}

Var reduce_hw(const Var& a) {
    check_rank4(a, "reduce_hw");
    const auto& sh = a.val().shape;
    const std::size_t hw = static_cast<std::size_t>(sh[2]) * sh[3];
    Tensor out({sh[0], sh[1]});
    for (int n = 0; n < sh[0]; ++n) {
        for (int c = 0; c < sh[1]; ++c) {
            double s = 0.0;
            const std::size_t base = (static_cast<std::size_t>(n) * sh[1] + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) s += a.val().data[base + i];
            out.data[static_cast<std::size_t>(n) * sh[1] + c] = s;
        }
    }
    const std::vector<int> shape = sh;
    return Var(make_node(std::move(out), {a}, [shape](const Var& gy) {
        return std::vector<Var>{expand_hw(gy, shape)};
    }));
}

Var expand_hw(const Var& a, std::vector<int> shape) {
    require(a.val().shape.size() == 2 && a.val().dim(0) == shape[0] &&
                a.val().dim(1) == shape[1],
            "expand_hw: shape mismatch");
    Tensor out(shape);
    const std::size_t hw = static_cast<std::size_t>(shape[2]) * shape[3];
    for (std::size_t nc = 0; nc < a.val().numel(); ++nc) {
        const double v = a.val().data[nc];
        for (std::size_t i = 0; i < hw; ++i) out.data[nc * hw + i] = v;
    }
    return Var(make_node(std::move(out), {a}, [](const Var& gy) {
        return std::vector<Var>{reduce_hw(gy)};
    }));
}

Var mean_over_batch(const Var& a) {
    require(a.val().shape.size() == 1, "mean_over_batch: expected rank-1");
    return scale(sum_all(a), 1.0 / static_cast<double>(a.val().dim(0)));
}

// ---------------- linear algebra ----------------

Var matmul(const Var& a, const Var& b) {
    require(a.val().shape.size() == 2 && b.val().shape.size() == 2 &&
                a.val().dim(1) == b.val().dim(0),
            "matmul: incompatible shapes " + a.val().shape_str() + " x " + b.val().shape_str());
    const int m = a.val().dim(0), k = a.val().dim(1), n = b.val().dim(1);
    Tensor out({m, n});
    RowMap(out.data.data(), m, n) = ConstRowMap(a.val().data.data(), m, k) *
                                    ConstRowMap(b.val().data.data(), k, n);
    return Var(make_node(std::move(out), {a, b}, [a, b](const Var& gy) {
        return std::vector<Var>{matmul(gy, transpose(b)), matmul(transpose(a), gy)};
    }));
}

Var transpose(const Var& a) {
    require(a.val().shape.size() == 2, "transpose: expected rank-2");
    const int m = a.val().dim(0), k = a.val().dim(1);
    Tensor out({k, m});
    RowMap(out.data.data(), k, m) = ConstRowMap(a.val().data.data(), m, k).transpose();
    return Var(make_node(std::move(out), {a}, [](const Var& gy) {
        return std::vector<Var>{transpose(gy)};
    }));
}

Var bias_add_vec(const Var& a, const Var& b) {
    require(a.val().shape.size() == 2 && b.val().shape.size() == 1 &&
                a.val().dim(1) == b.val().dim(0),
            "bias_add_vec: shape mismatch");
    Tensor out = a.val();
    const int m = a.val().dim(0), k = a.val().dim(1);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) out.data[static_cast<std::size_t>(i) * k + j] += b.val().data[j];
    }
    return Var(make_node(std::move(out), {a, b}, [](const Var& gy) {
        return std::vector<Var>{gy, reduce_rows(gy)};
    }));
}

Var reduce_rows(const Var& a) {
    require(a.val().shape.size() == 2, "reduce_rows: expected rank-2");
    const int m = a.val().dim(0), k = a.val().dim(1);
    Tensor out({k});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) out.data[j] += a.val().data[static_cast<std::size_t>(i) * k + j];
    }
    return Var(make_node(std::move(out), {a}, [m](const Var& gy) {
        Var ones = Var::constant(Tensor::full({m, 1}, 1.0));
        return std::vector<Var>{matmul(ones, reshape(gy, {1, gy.val().dim(0)}))};
    }));
}

// ---------------- convolution ----------------

namespace {

// im2col for stride-1 same-padded convolution: cols is [Ci*k*k, H*W].
void im2col(const double* x, int ci, int h, int w, int k, double* cols) {
    const int pad = (k - 1) / 2;
    const int hw = h * w;
    for (int c = 0; c < ci; ++c) {
        for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
                double* dst = cols + (static_cast<std::size_t>(c) * k * k + u * k + v) *
                                         static_cast<std::size_t>(hw);
                for (int i = 0; i < h; ++i) {
                    const int si = i + u - pad;
                    if (si < 0 || si >= h) {
                        std::fill(dst + i * w, dst + (i + 1) * w, 0.0);
                        continue;
                    }
                    const double* src = x + (static_cast<std::size_t>(c) * h + si) * w;
                    for (int j = 0; j < w; ++j) {
                        const int sj = j + v - pad;
                        dst[i * w + j] = (sj < 0 || sj >= w) ? 0.0 : src[sj];
                    }
                }
            }
        }
    }
}

// Scatter-add transpose of im2col.
void col2im(const double* cols, int ci, int h, int w, int k, double* x) {
    const int pad = (k - 1) / 2;
    const int hw = h * w;
    for (int c = 0; c < ci; ++c) {
        for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
                const double* src = cols + (static_cast<std::size_t>(c) * k * k + u * k + v) *
                                               static_cast<std::size_t>(hw);
                for (int i = 0; i < h; ++i) {
                    const int si = i + u - pad;
                    if (si < 0 || si >= h) continue;
                    double* dst = x + (static_cast<std::size_t>(c) * h + si) * w;
                    for (int j = 0; j < w; ++j) {
                        const int sj = j + v - pad;
                        if (sj >= 0 && sj < w) dst[sj] += src[i * w + j];
                    }
                }
            }
        }
    }
}

void check_conv_args(const Var& x, const Var& w) {
    check_rank4(x, "conv2d");
    check_rank4(w, "conv2d");
    require(w.val().dim(2) == w.val().dim(3) && w.val().dim(2) % 2 == 1,
            "conv2d: kernel must be square and odd");
    require(x.val().dim(1) == w.val().dim(1),
            "conv2d: input channels " + std::to_string(x.val().dim(1)) +
                " do not match kernel " + std::to_string(w.val().dim(1)));
}

}  // namespace

Var conv2d(const Var& x, const Var& w) {
    check_conv_args(x, w);
    const int n = x.val().dim(0), ci = x.val().dim(1), h = x.val().dim(2), wd = x.val().dim(3);
    const int co = w.val().dim(0), k = w.val().dim(2);
    const int hw = h * wd;
    Tensor out({n, co, h, wd});
    std::vector<double> cols(static_cast<std::size_t>(ci) * k * k * hw);
    ConstRowMap wm(w.val().data.data(), co, ci * k * k);
    for (int s = 0; s < n; ++s) {
        im2col(x.val().data.data() + static_cast<std::size_t>(s) * ci * hw, ci, h, wd, k,
               cols.data());
        RowMap(out.data.data() + static_cast<std::size_t>(s) * co * hw, co, hw) =
            wm * ConstRowMap(cols.data(), ci * k * k, hw);
    }
    return Var(make_node(std::move(out), {x, w}, [x, w, k](const Var& gy) {
        return std::vector<Var>{conv2d_bwd_input(gy, w), conv2d_bwd_weight(x, gy, k)};
    }));
}

Var conv2d_bwd_input(const Var& gy, const Var& w) {
    check_rank4(gy, "conv2d_bwd_input");
    check_rank4(w, "conv2d_bwd_input");
    require(gy.val().dim(1) == w.val().dim(0), "conv2d_bwd_input: channel mismatch");
    const int n = gy.val().dim(0), co = gy.val().dim(1), h = gy.val().dim(2), wd = gy.val().dim(3);
    const int ci = w.val().dim(1), k = w.val().dim(2);
    const int hw = h * wd;
    Tensor out({n, ci, h, wd});
    std::vector<double> cols(static_cast<std::size_t>(ci) * k * k * hw);
    ConstRowMap wm(w.val().data.data(), co, ci * k * k);
    for (int s = 0; s < n; ++s) {
        RowMap(cols.data(), ci * k * k, hw) =
            wm.transpose() * ConstRowMap(gy.val().data.data() + static_cast<std::size_t>(s) * co * hw,
                                         co, hw);
        col2im(cols.data(), ci, h, wd, k,
               out.data.data() + static_cast<std::size_t>(s) * ci * hw);
    }
    return Var(make_node(std::move(out), {gy, w}, [gy, w, k](const Var& g) {
        return std::vector<Var>{conv2d(g, w), conv2d_bwd_weight(g, gy, k)};
    }));
}

Var conv2d_bwd_weight(const Var& x, const Var& gy, int k) {
    check_rank4(x, "conv2d_bwd_weight");
    check_rank4(gy, "conv2d_bwd_weight");
    require(x.val().dim(0) == gy.val().dim(0) && x.val().dim(2) == gy.val().dim(2) &&
                x.val().dim(3) == gy.val().dim(3),
            "conv2d_bwd_weight: shape mismatch");
    const int n = x.val().dim(0), ci = x.val().dim(1), h = x.val().dim(2), wd = x.val().dim(3);
    const int co = gy.val().dim(1);
    const int hw = h * wd;
    Tensor out({co, ci, k, k});
    std::vector<double> cols(static_cast<std::size_t>(ci) * k * k * hw);
    RowMap gw(out.data.data(), co, ci * k * k);
    for (int s = 0; s < n; ++s) {
        im2col(x.val().data.data() + static_cast<std::size_t>(s) * ci * hw, ci, h, wd, k,
               cols.data());
        gw.noalias() +=
            ConstRowMap(gy.val().data.data() + static_cast<std::size_t>(s) * co * hw, co, hw) *
            ConstRowMap(cols.data(), ci * k * k, hw).transpose();
    }
    return Var(make_node(std::move(out), {x, gy}, [x, gy](const Var& g) {
        return std::vector<Var>{conv2d_bwd_input(gy, g), conv2d(x, g)};
    }));
}

Var bias_add(const Var& x, const Var& b) {
    check_rank4(x, "bias_add");
    require(b.val().shape.size() == 1 && b.val().dim(0) == x.val().dim(1),
            "bias_add: bias length must equal channel count");
    Tensor out = x.val();
    const int n = x.val().dim(0), c = x.val().dim(1);
    const std::size_t hw = static_cast<std::size_t>(x.val().dim(2)) * x.val().dim(3);
    for (int s = 0; s < n; ++s) {
        for (int ch = 0; ch < c; ++ch) {
            const double bv = b.val().data[ch];
            double* p = out.data.data() + (static_cast<std::size_t>(s) * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) p[i] += bv;
        }
    }
    return Var(make_node(std::move(out), {x, b}, [](const Var& gy) {
        return std::vector<Var>{gy, reduce_nhw(gy)};
    }));
}

Var reduce_nhw(const Var& x) {
    check_rank4(x, "reduce_nhw");
    const int n = x.val().dim(0), c = x.val().dim(1);
    const std::size_t hw = static_cast<std::size_t>(x.val().dim(2)) * x.val().dim(3);
    Tensor out({c});
    for (int s = 0; s < n; ++s) {
        for (int ch = 0; ch < c; ++ch) {
            const double* p = x.val().data.data() + (static_cast<std::size_t>(s) * c + ch) * hw;
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += p[i];
            out.data[ch] += acc;
        }
    }
    const std::vector<int> shape = x.val().shape;
    return Var(make_node(std::move(out), {x}, [shape](const Var& gy) {
        Var zeros = Var::constant(Tensor::zeros(shape));
        return std::vector<Var>{bias_add(zeros, gy)};
    }));
}

// ---------------- shape ops ----------------

Var avgpool2(const Var& x) {
    check_rank4(x, "avgpool2");
    const int n = x.val().dim(0), c = x.val().dim(1), h = x.val().dim(2), w = x.val().dim(3);
    require(h % 2 == 0 && w % 2 == 0, "avgpool2: spatial dims must be even, got " +
                                          x.val().shape_str());
    Tensor out({n, c, h / 2, w / 2});
    for (int s = 0; s < n; ++s) {
        for (int ch = 0; ch < c; ++ch) {
            for (int i = 0; i < h / 2; ++i) {
                for (int j = 0; j < w / 2; ++j) {
                    out.at4(s, ch, i, j) = 0.25 * (x.val().at4(s, ch, 2 * i, 2 * j) +
                                                   x.val().at4(s, ch, 2 * i, 2 * j + 1) +
                                                   x.val().at4(s, ch, 2 * i + 1, 2 * j) +
                                                   x.val().at4(s, ch, 2 * i + 1, 2 * j + 1));
                }
            }
        }
    }
    return Var(make_node(std::move(out), {x}, [h, w](const Var& gy) {
        return std::vector<Var>{avgpool2_bwd(gy, h, w)};
    }));
}

Var avgpool2_bwd(const Var& gy, int h, int w) {
    check_rank4(gy, "avgpool2_bwd");
    const int n = gy.val().dim(0), c = gy.val().dim(1);
    require(gy.val().dim(2) * 2 == h && gy.val().dim(3) * 2 == w, "avgpool2_bwd: shape mismatch");
    Tensor out({n, c, h, w});
    for (int s = 0; s < n; ++s) {
        for (int ch = 0; ch < c; ++ch) {
            for (int i = 0; i < h / 2; ++i) {
                for (int j = 0; j < w / 2; ++j) {
                    const double v = 0.25 * gy.val().at4(s, ch, i, j);
                    out.at4(s, ch, 2 * i, 2 * j) = v;
                    out.at4(s, ch, 2 * i, 2 * j + 1) = v;
                    out.at4(s, ch, 2 * i + 1, 2 * j) = v;
                    out.at4(s, ch, 2 * i + 1, 2 * j + 1) = v;
                }
            }
        }
    }
    return Var(make_node(std::move(out), {gy}, [](const Var& g) {
        return std::vector<Var>{avgpool2(g)};
    }));
}

Var upsample_nn(const Var& x, int k) {
    check_rank4(x, "upsample_nn");
    require(k >= 1, "upsample_nn: factor must be >= 1");
    const int n = x.val().dim(0), c = x.val().dim(1), h = x.val().dim(2), w = x.val().dim(3);
    Tensor out({n, c, h * k, w * k});
    for (int s = 0; s < n; ++s) {
        for (int ch = 0; ch < c; ++ch) {
            for (int i = 0; i < h * k; ++i) {
                for (int j = 0; j < w * k; ++j) {
                    out.at4(s, ch, i, j) = x.val().at4(s, ch, i / k, j / k);
                }
            }
        }
    }
    return Var(make_node(std::move(out), {x}, [k](const Var& gy) {
        return std::vector<Var>{upsample_nn_bwd(gy, k)};
    }));
}

Var upsample_nn_bwd(const Var& gy, int k) {
    check_rank4(gy, "upsample_nn_bwd");
    const int n = gy.val().dim(0), c = gy.val().dim(1), hk = gy.val().dim(2), wk = gy.val().dim(3);
    require(hk % k == 0 && wk % k == 0, "upsample_nn_bwd: dims not divisible by factor");
    const int h = hk / k, w = wk / k;
    Tensor out({n, c, h, w});
    for (int s = 0; s < n; ++s) {
        for (int ch = 0; ch < c; ++ch) {
            for (int i = 0; i < hk; ++i) {
                for (int j = 0; j < wk; ++j) {
                    out.at4(s, ch, i / k, j / k) += gy.val().at4(s, ch, i, j);
                }
            }
        }
    }
    return Var(make_node(std::move(out), {gy}, [k](const Var& g) {
        return std::vector<Var>{upsample_nn(g, k)};
    }));
}

Var concat_ch(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_ch: no inputs");
    const int n = parts[0].val().dim(0), h = parts[0].val().dim(2), w = parts[0].val().dim(3);
    int c_total = 0;
    for (const auto& p : parts) {
        check_rank4(p, "concat_ch");
        require(p.val().dim(0) == n && p.val().dim(2) == h && p.val().dim(3) == w,
                "concat_ch: incompatible shapes");
        c_total += p.val().dim(1);
    }
    Tensor out({n, c_total, h, w});
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int s = 0; s < n; ++s) {
        int c0 = 0;
        for (const auto& p : parts) {
            const int pc = p.val().dim(1);
            std::copy(p.val().data.begin() + static_cast<std::size_t>(s) * pc * hw,
                      p.val().data.begin() + static_cast<std::size_t>(s + 1) * pc * hw,
                      out.data.begin() + (static_cast<std::size_t>(s) * c_total + c0) * hw);
            c0 += pc;
        }
    }
    std::vector<int> splits;
    for (const auto& p : parts) splits.push_back(p.val().dim(1));
    return Var(make_node(std::move(out), parts, [splits](const Var& gy) {
        std::vector<Var> gs;
        int c0 = 0;
        for (int pc : splits) {
            gs.push_back(slice_ch(gy, c0, c0 + pc));
            c0 += pc;
        }
        return gs;
    }));
}

Var slice_ch(const Var& x, int c_begin, int c_end) {
    check_rank4(x, "slice_ch");
    const int n = x.val().dim(0), c = x.val().dim(1), h = x.val().dim(2), w = x.val().dim(3);
    require(0 <= c_begin && c_begin < c_end && c_end <= c, "slice_ch: bad channel range");
    const int pc = c_end - c_begin;
    Tensor out({n, pc, h, w});
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int s = 0; s < n; ++s) {
        std::copy(x.val().data.begin() + (static_cast<std::size_t>(s) * c + c_begin) * hw,
                  x.val().data.begin() + (static_cast<std::size_t>(s) * c + c_end) * hw,
                  out.data.begin() + static_cast<std::size_t>(s) * pc * hw);
    }
    return Var(make_node(std::move(out), {x}, [c_begin, c_end, c, n, h, w](const Var& gy) {
        std::vector<Var> pieces;
        if (c_begin > 0) pieces.push_back(Var::constant(Tensor::zeros({n, c_begin, h, w})));
        pieces.push_back(gy);
        if (c_end < c) pieces.push_back(Var::constant(Tensor::zeros({n, c - c_end, h, w})));
        return std::vector<Var>{concat_ch(pieces)};
    }));
}

Var reshape(const Var& x, std::vector<int> shape) {
    require(Tensor::numel_of(shape) == x.val().numel(), "reshape: element count mismatch");
    Tensor out(shape, x.val().data);
    const std::vector<int> orig = x.val().shape;
    return Var(make_node(std::move(out), {x}, [orig](const Var& gy) {
        return std::vector<Var>{reshape(gy, orig)};
    }));
}

}  // namespace dsc::ad
