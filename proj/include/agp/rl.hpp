#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "agp/errors.hpp"
#include "agp/text.hpp"

namespace agp {

struct RlConfig {
    double epsilon = 0.2;     // clip width
    double beta = 0.01;       // reference-penalty coefficient
    double epsilon0 = 1e-8;   // log floor keeping the penalty finite
    int candidates = 4;       // group size K
    int budget = 3;           // iteration budget T

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0,1)");
        if (beta < 0.0) throw Error(ErrorKind::InvalidArgument, "beta must be >= 0");
        if (epsilon0 <= 0.0) throw Error(ErrorKind::InvalidArgument, "epsilon0 must be > 0");
        if (candidates < 1) throw Error(ErrorKind::InvalidArgument, "candidates must be >= 1");
        if (budget < 1) throw Error(ErrorKind::InvalidArgument, "budget must be >= 1");
    }
};

// Signal tuple of one solution step: binary task reward, penalty-adjusted
// advantage, similarity ratio surrogate and the clipped objective.
struct RlSignals {
    double reward = 0.0;
    double advantage = 0.0;
    double objective = 0.0;
    double ratio = 0.0;
    double penalty = 0.0;
};

// reward   r  = exact_match(y, y_star) in {0,1}
// ratio    rho = eta(y_prev, y)
// penalty  pen = beta * |log(max(eta(y_sft, y), epsilon0))|
// advantage A  = r - pen
// objective J  = min(rho*A, clip(rho, 1-eps, 1+eps)*A)
inline RlSignals reinforcepp_signals(const std::string& y_t, const std::string& y_prev,
                                     const std::string& y_star, const std::string& y_sft,
                                     const RlConfig& cfg) {
    cfg.validate();
    RlSignals s;
    s.reward = exact_match_reward(y_t, y_star);
    s.ratio = similarity(y_prev, y_t);
    s.penalty = cfg.beta * std::abs(std::log(std::max(similarity(y_sft, y_t), cfg.epsilon0)));
    s.advantage = s.reward - s.penalty;
    const double clipped = std::clamp(s.ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
    s.objective = std::min(s.ratio * s.advantage, clipped * s.advantage);
    return s;
}

// Group signals for K candidate solutions: rewards standardized by the
// group's mean and population std (all-zero advantages for a degenerate
// group), with the one-sided clip applied per candidate.
struct GroupSignals {
    std::vector<double> rewards;
    std::vector<double> advantages;
    std::vector<double> objectives;
    std::vector<double> ratios;
    double mean_reward = 0.0;
    double std_reward = 0.0;
};

inline double grpo_clipped_objective(double ratio, double advantage, double epsilon) {
    const double clipped = advantage >= 0.0 ? std::min(ratio, 1.0 + epsilon)
                                            : std::max(ratio, 1.0 - epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

inline GroupSignals grpo_signals(const std::vector<std::string>& candidates,
                                 const std::string& y_star, const std::string& y_prev,
                                 const RlConfig& cfg) {
    cfg.validate();
    if (candidates.empty())
        throw Error(ErrorKind::EmptyCandidateSet, "grpo requires at least one candidate");
    GroupSignals g;
    const std::size_t k = candidates.size();
    g.rewards.reserve(k);
    for (const auto& y : candidates) g.rewards.push_back(exact_match_reward(y, y_star));

    double sum = 0.0;
    for (double r : g.rewards) sum += r;
    g.mean_reward = sum / static_cast<double>(k);
    double var = 0.0;
    for (double r : g.rewards) var += (r - g.mean_reward) * (r - g.mean_reward);
    g.std_reward = std::sqrt(var / static_cast<double>(k));

    g.advantages.reserve(k);
    for (double r : g.rewards)
        g.advantages.push_back(g.std_reward > 0.0 ? (r - g.mean_reward) / g.std_reward : 0.0);

    g.ratios.reserve(k);
    g.objectives.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        g.ratios.push_back(similarity(y_prev, candidates[i]));
        g.objectives.push_back(grpo_clipped_objective(g.ratios[i], g.advantages[i], cfg.epsilon));
    }
    return g;
}

}  // namespace agp
