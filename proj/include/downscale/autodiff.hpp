#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "downscale/tensor.hpp"

namespace dsc::ad {

// Define-by-run reverse-mode autodiff. Every vector-Jacobian product is built
// from the same primitives, so gradients are themselves graph nodes and a
// second backward pass yields exact higher-order derivatives (the
// gradient-penalty term differentiates through a gradient).
struct Node;

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Var leaf(Tensor value, bool requires_grad);
    static Var constant(Tensor value) { return leaf(std::move(value), false); }
    static Var scalar(double v) { return constant(Tensor::scalar(v)); }

    bool defined() const { return node_ != nullptr; }
    const Tensor& val() const;
    Tensor& val_mut();  // leaf parameter updates between graphs
    bool requires_grad() const;
    Node* raw() const { return node_.get(); }

private:
    std::shared_ptr<Node> node_;
};

struct Node {
    Tensor value;
    std::vector<Var> inputs;
    // Maps the output cotangent to one cotangent per input, as graph Vars.
    std::function<std::vector<Var>(const Var&)> vjp;
    bool requires_grad = false;
};

using GradMap = std::unordered_map<const Node*, Var>;

// Gradients of the scalar `root` w.r.t. every reachable node that requires
// grad. The returned Vars stay differentiable.
GradMap backward(const Var& root);

// Lookup helper; a missing entry means the value does not influence root and
// yields zeros of its shape.
Var grad_of(const GradMap& grads, const Var& x);

// --- elementwise ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var mul_mask(const Var& a, const Tensor& mask);  // mask is a constant
Var vdiv(const Var& a, const Var& b);
Var vexp(const Var& a);
Var vsqrt(const Var& a);
Var softplus(const Var& a);
Var sigmoid(const Var& a);
Var vtanh(const Var& a);
Var leaky_relu(const Var& a, double alpha);

// --- reductions / broadcasts ---
Var sum_all(const Var& a);                           // -> [1]
Var mean_all(const Var& a);                          // -> [1]
Var broadcast_scalar(const Var& s, std::vector<int> shape);
Var reduce_chw(const Var& a);                        // [N,C,H,W] -> [N]
Var expand_chw(const Var& a, std::vector<int> shape);
Var reduce_hw(const Var& a);                         // [N,C,H,W] -> [N,C]
Var expand_hw(const Var& a, std::vector<int> shape);
Var mean_over_batch(const Var& a);                   // [N] -> [1]

// --- linear algebra ---
Var matmul(const Var& a, const Var& b);  // [M,K] x [K,N]
Var transpose(const Var& a);             // [M,K] -> [K,M]
Var bias_add_vec(const Var& a, const Var& b);  // [M,K] + [K]
Var reduce_rows(const Var& a);                 // [M,K] -> [K]

// --- convolution (stride 1, odd kernel, same zero padding) ---
Var conv2d(const Var& x, const Var& w);                    // [N,Ci,H,W],[Co,Ci,k,k]
Var conv2d_bwd_input(const Var& gy, const Var& w);         // adjoint w.r.t. x
Var conv2d_bwd_weight(const Var& x, const Var& gy, int k); // adjoint w.r.t. w
Var bias_add(const Var& x, const Var& b);                  // [N,C,H,W] + [C]
Var reduce_nhw(const Var& x);                              // [N,C,H,W] -> [C]

// --- shape ops ---
Var avgpool2(const Var& x);            // [N,C,H,W] -> [N,C,H/2,W/2]
Var avgpool2_bwd(const Var& gy, int h, int w);
Var upsample_nn(const Var& x, int k);  // [N,C,H,W] -> [N,C,kH,kW]
Var upsample_nn_bwd(const Var& gy, int k);
Var concat_ch(const std::vector<Var>& parts);
Var slice_ch(const Var& x, int c_begin, int c_end);
Var reshape(const Var& x, std::vector<int> shape);

}  // namespace dsc::ad
