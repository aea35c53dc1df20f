#pragma once

#include "sorl/mdp.hpp"
#include "sorl/rng.hpp"

#include <Eigen/Dense>

#include <vector>

namespace sorl::testing {

/// Hand-built MDP; s is taken from the support size.
inline SparseLinearMdp make_mdp(const Eigen::MatrixXd& phi, int num_states, int num_actions,
                                const std::vector<Eigen::VectorXd>& theta, const std::vector<Eigen::MatrixXd>& mu,
                                std::vector<int> support, int x1 = 0) {
    FeatureTable f{num_states, num_actions, phi};
    const int s = static_cast<int>(support.size());
    return SparseLinearMdp(f, std::move(support), theta, mu, s, x1);
}

/// Deterministic chain: every (x, a) moves to x + 1 (the last state absorbs);
/// rewards are one everywhere. Features are one-hot over next state, plus a
/// reward coordinate that is always 1.
inline SparseLinearMdp chain_mdp(int num_states, int num_actions, int H) {
    const int d = num_states + 1;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(num_states * num_actions, d);
    for (int x = 0; x < num_states; ++x)
        for (int a = 0; a < num_actions; ++a) {
            phi(x * num_actions + a, 0) = 1.0;
            phi(x * num_actions + a, 1 + std::min(x + 1, num_states - 1)) = 1.0;
        }
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    theta(0) = 1.0;
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(num_states, d);
    for (int x = 0; x < num_states; ++x) mu(x, 1 + x) = 1.0;
    std::vector<int> support(d);
    for (int i = 0; i < d; ++i) support[i] = i;
    FeatureTable f{num_states, num_actions, phi};
    return SparseLinearMdp(f, support, std::vector<Eigen::VectorXd>(H, theta), std::vector<Eigen::MatrixXd>(H, mu), d, 0);
}

inline TabularPolicy random_tabular(const SparseLinearMdp& m, CounterRng& rng) {
    TabularPolicy p;
    for (int h = 0; h < m.horizon(); ++h) {
        Eigen::MatrixXd t(m.num_states(), m.num_actions());
        for (int x = 0; x < t.rows(); ++x) {
            for (int a = 0; a < t.cols(); ++a) t(x, a) = rng.uniform() + 1e-3;
            t.row(x) /= t.row(x).sum();
        }
        p.probs.push_back(t);
    }
    return p;
}

/// Value of pi at x1 computed by forward propagation of the state distribution,
/// using only transition_distribution and mean_reward.
inline double forward_value(const SparseLinearMdp& m, const Policy& pi) {
    const FeatureTable& f = m.features();
    Eigen::VectorXd dist = Eigen::VectorXd::Zero(m.num_states());
    dist(m.x1()) = 1.0;
    double total = 0.0;
    for (int h = 0; h < m.horizon(); ++h) {
        const Eigen::MatrixXd probs = pi.action_probs(f, h);
        Eigen::VectorXd next = Eigen::VectorXd::Zero(m.num_states());
        for (int x = 0; x < m.num_states(); ++x)
            for (int a = 0; a < m.num_actions(); ++a) {
                const double w = dist(x) * probs(x, a);
                if (w == 0.0) continue;
                total += w * m.mean_reward(h, x, a);
                next += w * m.transition_distribution(h, x, a);
            }
        dist = next;
    }
    return total;
}

}  // namespace sorl::testing
