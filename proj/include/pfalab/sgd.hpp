#ifndef PFALAB_SGD_HPP
#define PFALAB_SGD_HPP

#include <cstddef>
#include <vector>

#include "pfalab/tensor.hpp"

namespace pfalab {

struct SgdConfig {
    double learning_rate = 0.03;
    double momentum = 0.9;
    double weight_decay = 0.0;
};

// SGD with classical momentum:
//   v <- m*v + g + wd*p;  p <- p - lr*v
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<Tensor> params, SgdConfig cfg)
        : params_(std::move(params)), cfg_(cfg) {
        velocities_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i)
            velocities_[i].assign(params_[i].size(), 0.0);
    }

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i].mutable_values();
            auto& v = velocities_[i];
            const auto& g = params_[i].grad();
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double grad = g.empty() ? 0.0 : g[j];
                v[j] = cfg_.momentum * v[j] + grad + cfg_.weight_decay * p[j];
                p[j] -= cfg_.learning_rate * v[j];
            }
            params_[i].zero_grad();
        }
        ++step_count_;
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    std::size_t step_count() const { return step_count_; }
    const SgdConfig& config() const { return cfg_; }
    const std::vector<std::vector<double>>& velocities() const { return velocities_; }
    void set_velocities(std::vector<std::vector<double>> v) {
        velocities_ = std::move(v);
    }
    void set_step_count(std::size_t c) { step_count_ = c; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> velocities_;
    SgdConfig cfg_;
    std::size_t step_count_ = 0;
};

}  // namespace pfalab

#endif
