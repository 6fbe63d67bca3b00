#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "iprnet/core/nn.hpp"

namespace iprnet {

/// lr(iter) = base_lr * (1 - iter/max_iters)^power.
inline double poly_lr(double base_lr, int iter, int max_iters, double power) {
    if (iter < 0 || iter > max_iters)
        throw DomainError("poly_lr: iter " + std::to_string(iter) + " outside [0, " +
                          std::to_string(max_iters) + "]");
    if (max_iters == 0) return base_lr;
    return base_lr * std::pow(1.0 - static_cast<double>(iter) / max_iters, power);
}

/// SGD with momentum; weight decay is added to the gradient before the
/// momentum update. Parameters whose Var does not require grad are skipped.
class SgdOptimizer {
public:
    SgdOptimizer() = default;
    SgdOptimizer(double momentum, double weight_decay)
        : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(const std::vector<ParamRef>& params, double lr) {
        for (const auto& p : params) {
            if (!p.trainable()) continue;
            Var v = p.var;
            Tensor& value = v.value();
            const Tensor& grad = v.grad();
            Tensor& buf = buffer(p.name, value);
            const std::int64_t n = value.numel();
            for (std::int64_t i = 0; i < n; ++i) {
                const double g = grad[i] + weight_decay_ * value[i];
                buf[i] = momentum_ * buf[i] + g;
                value[i] -= lr * buf[i];
            }
        }
    }

    const std::map<std::string, Tensor>& state() const { return buffers_; }
    void set_state(std::map<std::string, Tensor> state) { buffers_ = std::move(state); }

private:
    Tensor& buffer(const std::string& name, const Tensor& like) {
        auto it = buffers_.find(name);
        if (it == buffers_.end()) it = buffers_.emplace(name, Tensor(like.shape())).first;
        return it->second;
    }

    double momentum_ = 0.9;
    double weight_decay_ = 0.0;
    std::map<std::string, Tensor> buffers_;
};

} // namespace iprnet
