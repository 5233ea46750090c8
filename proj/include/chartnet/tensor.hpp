#pragma once

#include <cstddef>
#include <vector>

namespace chartnet {

/// Dense row-major tensor of doubles. 3-D tensors use height x width x
/// channels order, so a pixel's channels are contiguous.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims);

    static std::size_t element_count(const std::vector<int>& dims);

    std::size_t size() const { return v.size(); }
    int dim(std::size_t i) const { return shape[i]; }

    double& at(int r, int c, int ch) {
        return v[static_cast<std::size_t>((r * shape[1] + c) * shape[2] + ch)];
    }
    double at(int r, int c, int ch) const {
        return v[static_cast<std::size_t>((r * shape[1] + c) * shape[2] + ch)];
    }

    bool operator==(const Tensor&) const = default;
};

}  // namespace chartnet
