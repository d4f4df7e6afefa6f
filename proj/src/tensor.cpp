#include "downscale/tensor.hpp"

#include <numeric>

#include "downscale/error.hpp"

namespace dsc {

std::size_t Tensor::numel_of(const std::vector<int>& s) {
    require(!s.empty() && s.size() <= 4, "tensor: rank must be 1..4");
    std::size_t n = 1;
    for (int d : s) {
        require(d > 0, "tensor: non-positive dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor Tensor::full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace dsc
