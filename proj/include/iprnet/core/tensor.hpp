#pragma once

#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "iprnet/core/errors.hpp"

namespace iprnet {

/// Dense row-major array of doubles. Rank is dynamic; the library uses rank 1
/// for prototype vectors, rank 2 for spatial maps and rank 3 for (C, h, w)
/// feature maps and images.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double fill = 0.0) : shape_(std::move(shape)) {
        std::int64_t n = 1;
        for (int d : shape_) {
            if (d < 0) throw ShapeError("Tensor: negative dimension");
            n *= d;
        }
        data_.assign(static_cast<std::size_t>(n), fill);
    }

    static Tensor scalar(double v) {
        Tensor t(std::vector<int>{});
        t.data_.assign(1, v);
        return t;
    }

    static Tensor from(std::vector<int> shape, std::initializer_list<double> values) {
        Tensor t(std::move(shape));
        if (t.numel() != static_cast<std::int64_t>(values.size()))
            throw ShapeError("Tensor::from: value count does not match shape");
        std::size_t i = 0;
        for (double v : values) t.data_[i++] = v;
        return t;
    }

    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }

    double& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    /// Start of channel plane c for a rank-3 tensor.
    double* channel(int c) {
        return data_.data() + static_cast<std::size_t>(c) * shape_[1] * shape_[2];
    }
    const double* channel(int c) const {
        return data_.data() + static_cast<std::size_t>(c) * shape_[1] * shape_[2];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    double item() const {
        if (numel() != 1) throw ShapeError("Tensor::item: tensor is not a scalar");
        return data_[0];
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) os << ",";
            os << shape_[i];
        }
        os << ")";
        return os.str();
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

/// FNV-1a over raw bytes; used by tests and the trainer to assert that frozen
/// parameters never change.
inline std::uint64_t checksum_bytes(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto* p = reinterpret_cast<const unsigned char*>(t.data());
    const std::size_t n = static_cast<std::size_t>(t.numel()) * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

} // namespace iprnet
