#pragma once

// Central finite-difference check of the analytic model gradient.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "permlearn/model.hpp"
#include "permlearn/permutation.hpp"
#include "permlearn/sequence.hpp"
#include "permlearn/sinkhorn.hpp"

namespace permlearn {

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is ~0 from dominating through rounding noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

struct TensorCheck {
    std::string name;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    double max_rel_error = 0.0;
    bool passed(double tol) const { return max_rel_error < tol; }
};

struct GradCheckOptions {
    double step = 1e-5;
    double weight_decay = 0.0;
    /// Check at most this many coordinates per tensor (evenly strided); 0 checks all.
    std::size_t max_per_tensor = 0;
    /// Negates the analytic gradient; used to confirm the checker can fail.
    bool flip_sign = false;
};

/// Full objective: data loss plus weight_decay * ||theta||^2.
inline double model_objective(const ModelParams& params, const std::vector<FeatureVector>& shuffled,
                              const Permutation& target, const SinkhornConfig& cfg, LossKind kind,
                              double weight_decay) {
    const ForwardCache c = forward(params, shuffled, cfg, head_for(kind));
    return loss_for(c, target).value + weight_decay * params.squared_norm();
}

inline GradCheckReport check_model_gradients(const ModelParams& params, const std::vector<FeatureVector>& shuffled,
                                             const Permutation& target, const SinkhornConfig& cfg, LossKind kind,
                                             const GradCheckOptions& opt = {}) {
    const ForwardCache cache = forward(params, shuffled, cfg, head_for(kind));
    const LossValue lv = loss_for(cache, target);
    ModelParams analytic = backward(params, cache, lv.grad, opt.weight_decay).params;
    if (opt.flip_sign) analytic.scale(-1.0);

    GradCheckReport report;
    ModelParams probe = params;
    std::vector<std::vector<double>*> probe_tensors;
    probe.for_each_tensor([&](std::string_view, const std::vector<std::size_t>&, std::vector<double>& v) {
        probe_tensors.push_back(&v);
    });
    std::size_t t = 0;
    analytic.for_each_tensor([&](std::string_view name, const std::vector<std::size_t>&, const std::vector<double>& g) {
        std::vector<double>& values = *probe_tensors[t++];
        TensorCheck tc;
        tc.name = std::string(name);
        const std::size_t stride =
            opt.max_per_tensor == 0 || values.size() <= opt.max_per_tensor ? 1 : values.size() / opt.max_per_tensor;
        for (std::size_t k = 0; k < values.size(); k += stride) {
            const double saved = values[k];
            values[k] = saved + opt.step;
            const double up = model_objective(probe, shuffled, target, cfg, kind, opt.weight_decay);
            values[k] = saved - opt.step;
            const double down = model_objective(probe, shuffled, target, cfg, kind, opt.weight_decay);
            values[k] = saved;
            const double numeric = (up - down) / (2.0 * opt.step);
            const double err = relative_error(g[k], numeric);
            if (err >= tc.max_rel_error) {
                tc.max_rel_error = err;
                tc.worst_index = k;
                tc.analytic = g[k];
                tc.numeric = numeric;
            }
            ++tc.checked;
        }
        report.max_rel_error = std::max(report.max_rel_error, tc.max_rel_error);
        report.tensors.push_back(std::move(tc));
    });
    return report;
}

}  // namespace permlearn
