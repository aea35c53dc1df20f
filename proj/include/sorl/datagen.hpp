#pragma once

#include "sorl/mdp.hpp"
#include "sorl/regression.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sorl {

struct Step {
    int x = 0;
    int a = 0;
    double R = 0.0;
    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::vector<Step> steps;  // exactly H entries
    bool operator==(const Trajectory&) const = default;
};

struct Provenance {
    std::string mdp_hash;
    std::string behavior_policy_hash;
    std::uint64_t seed = 0;
    bool operator==(const Provenance&) const = default;
};

struct Dataset {
    std::vector<Trajectory> trajectories;
    std::vector<char> corrupted;  // one flag per trajectory
    double epsilon = 0.0;
    Provenance provenance;

    int size() const { return static_cast<int>(trajectories.size()); }
    int horizon() const { return trajectories.empty() ? 0 : static_cast<int>(trajectories[0].steps.size()); }
    int num_corrupted() const;
    bool operator==(const Dataset&) const = default;
};

enum class AttackKind { reward_poison, feature_swap, value_flip };
enum class TargetSelection { random, high_reward_first };

struct AttackSpec {
    AttackKind kind = AttackKind::reward_poison;
    double magnitude = 1.0;
    TargetSelection target_selection = TargetSelection::random;
};

AttackKind parse_attack_kind(const std::string& s);
TargetSelection parse_target_selection(const std::string& s);
std::string to_string(AttackKind k);
std::string to_string(TargetSelection t);

/// ceil(epsilon * N), robust to floating error in the product.
int corruption_budget(double epsilon, int n);

/// N rollouts from x1 with Bernoulli(r_h(x,a)) rewards. A mixture behavior
/// policy draws one member per trajectory.
Dataset generate_dataset(const SparseLinearMdp& m, const Policy& behavior, int n, std::uint64_t seed);

/// Rewrites exactly ceil(epsilon * N) trajectories. Random selection uses a
/// seeded permutation prefix, so corrupted sets are nested across epsilon.
Dataset corrupt_dataset(const Dataset& ds, const FeatureTable& f, const AttackSpec& attack, double epsilon,
                        std::uint64_t seed);

/// (1/N) sum phi phi^T over step h plus (lambda + epsilon) I.
Eigen::MatrixXd empirical_covariance(const Dataset& ds, const FeatureTable& f, int h, double lambda, double epsilon);

enum class TargetMode { policy, greedy };

/// Rows phi(x_h, a_h), targets R_h + E_{a ~ pi_{h+1}} Q_next(x_{h+1}, a) (policy
/// mode) or R_h + max_a Q_next(x_{h+1}, a) (greedy mode). Zero continuation at
/// the last step. pi may be null in greedy mode.
RegressionProblem srle_dataset_for_policy(const Dataset& ds, const FeatureTable& f, int h, const Policy* pi,
                                          const Eigen::MatrixXd& q_next, TargetMode mode);

/// Average over dataset states at step h of sum_a pi_h(a|x) phi(x,a).
Eigen::VectorXd empirical_policy_features(const Dataset& ds, const FeatureTable& f, int h, const Policy& pi);

/// X x A empirical state-action frequencies at step h.
Eigen::MatrixXd empirical_occupancy(const Dataset& ds, int num_states, int num_actions, int h);

}  // namespace sorl
