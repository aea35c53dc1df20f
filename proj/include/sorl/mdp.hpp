#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace sorl {

// Horizon steps are 0-based throughout: h = 0..H-1. The value range at step h
// is [0, H - h] and the l1 budget of the Q-class at step h is H - h.

/// Feature table phi(x, a) stored row-major: row x * num_actions + a.
struct FeatureTable {
    int num_states = 0;
    int num_actions = 0;
    Eigen::MatrixXd phi;  // (X*A) x d

    int dim() const { return static_cast<int>(phi.cols()); }
    int rows() const { return num_states * num_actions; }
    int row(int x, int a) const { return x * num_actions + a; }
    Eigen::VectorXd at(int x, int a) const { return phi.row(row(x, a)).transpose(); }
    /// (X x A) table of <phi(x,a), w>.
    Eigen::MatrixXd linear(const Eigen::VectorXd& w) const;
};

enum class FeatureFamily { signed_binary, anchored_simplex };
enum class CoverageMode { uniform, narrow };

struct MdpConfig {
    int num_states = 6;
    int num_actions = 3;
    int H = 3;
    int d = 12;
    int s = 2;
    FeatureFamily feature_family = FeatureFamily::signed_binary;
    CoverageMode coverage_mode = CoverageMode::uniform;
};

class SparseLinearMdp {
public:
    SparseLinearMdp() = default;
    /// Validates shapes and caches P_h and r_h. Does not check the sparse-MDP
    /// invariants; use check_invariants for that.
    SparseLinearMdp(FeatureTable features, std::vector<int> support, std::vector<Eigen::VectorXd> theta,
                    std::vector<Eigen::MatrixXd> mu, int s, int x1 = 0);

    int num_states() const { return features_.num_states; }
    int num_actions() const { return features_.num_actions; }
    int horizon() const { return static_cast<int>(theta_.size()); }
    int dim() const { return features_.dim(); }
    int sparsity() const { return s_; }
    int x1() const { return x1_; }
    const std::vector<int>& support() const { return support_; }
    const FeatureTable& features() const { return features_; }
    const Eigen::VectorXd& theta(int h) const { return theta_.at(h); }
    /// X x d, row x' is mu_h(x').
    const Eigen::MatrixXd& mu(int h) const { return mu_.at(h); }

    /// (X*A) x X transition matrix at step h.
    const Eigen::MatrixXd& P(int h) const { return P_.at(h); }
    /// X x A mean rewards at step h.
    const Eigen::MatrixXd& r(int h) const { return r_.at(h); }

    Eigen::VectorXd transition_distribution(int h, int x, int a) const;
    double mean_reward(int h, int x, int a) const;

    bool operator==(const SparseLinearMdp& o) const;

private:
    FeatureTable features_;
    std::vector<int> support_;
    std::vector<Eigen::VectorXd> theta_;
    std::vector<Eigen::MatrixXd> mu_;
    int s_ = 0;
    int x1_ = 0;
    std::vector<Eigen::MatrixXd> P_;
    std::vector<Eigen::MatrixXd> r_;
};

// ---------------------------------------------------------------- policies

class Policy;

struct TabularPolicy {
    std::vector<Eigen::MatrixXd> probs;  // per h, X x A
};

/// pi_h(a|x) proportional to exp(<phi(x,a), upsilon_h>).
struct LogLinearPolicy {
    std::vector<Eigen::VectorXd> upsilon;
};

/// Deterministic argmax of clip(<phi(x,a), w_h>, lo_h, hi_h), ties to the lowest action.
struct GreedyPolicy {
    std::vector<Eigen::VectorXd> w;
    std::vector<double> lo;
    std::vector<double> hi;
};

/// Episode-level uniform mixture: draw one member at the start, follow it for
/// the whole episode.
struct MixturePolicy {
    std::vector<Policy> members;
};

class Policy {
public:
    using Variant = std::variant<TabularPolicy, LogLinearPolicy, GreedyPolicy, MixturePolicy>;

    Policy() = default;
    Policy(TabularPolicy p) : v_(std::move(p)) {}
    Policy(LogLinearPolicy p) : v_(std::move(p)) {}
    Policy(GreedyPolicy p) : v_(std::move(p)) {}
    Policy(MixturePolicy p) : v_(std::move(p)) {}

    static Policy uniform(int num_states, int num_actions, int H);

    const Variant& variant() const { return v_; }
    bool is_mixture() const { return std::holds_alternative<MixturePolicy>(v_); }
    /// X x A action probabilities at step h. Throws std::logic_error for
    /// mixtures, whose per-step conditionals are history dependent.
    Eigen::MatrixXd action_probs(const FeatureTable& f, int h) const;
    /// Non-mixture members with repetition, recursively flattened.
    std::vector<const Policy*> leaves() const;
    std::string kind() const;

private:
    Variant v_;
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

// ---------------------------------------------------------------- exact DP

struct ValueTables {
    std::vector<Eigen::MatrixXd> Q;  // per h, X x A
    std::vector<Eigen::VectorXd> V;  // per h, X
};

struct OptimalSolution {
    ValueTables values;
    TabularPolicy policy;  // greedy, ties to the lowest action
};

/// r_h + P_h f_next, where f_next(x') = sum_a' pi_{h+1}(a'|x') f(x',a').
/// At the last step the continuation is zero.
Eigen::MatrixXd bellman_apply(const SparseLinearMdp& m, int h, const Eigen::MatrixXd& f, const Policy& pi);
/// Same with max_a' f(x',a').
Eigen::MatrixXd bellman_apply_greedy(const SparseLinearMdp& m, int h, const Eigen::MatrixXd& f);

/// For mixtures Q and V are the member averages.
ValueTables exact_values(const SparseLinearMdp& m, const Policy& pi);
OptimalSolution exact_optimal(const SparseLinearMdp& m);
double policy_value(const SparseLinearMdp& m, const Policy& pi);
double suboptimality(const SparseLinearMdp& m, const Policy& pi);

/// Per h, X x A state-action distribution of the policy started at x1.
std::vector<Eigen::MatrixXd> occupancy_measures(const SparseLinearMdp& m, const Policy& pi);
/// E_nu[phi phi^T] for an X x A distribution nu.
Eigen::MatrixXd population_covariance(const FeatureTable& f, const Eigen::MatrixXd& nu);

/// theta_h + sum_x' V(x') mu_h(x'): the linear weight of r_h + P_h V.
Eigen::VectorXd projection_weight(const SparseLinearMdp& m, int h, const Eigen::VectorXd& v_next);

/// max over V in [-1,1]^X of || sum_x' V(x') mu_h(x') ||_1, computed exactly by
/// enumerating sign vectors on the support.
double mu_operator_norm(const SparseLinearMdp& m, int h);

/// Human-readable list of violated invariants; empty when the MDP is valid.
std::vector<std::string> check_invariants(const SparseLinearMdp& m, double tol = 1e-12);

// ---------------------------------------------------------------- generators

/// Random anchored sparse linear MDP. Coordinate support[0] is an anchor with
/// phi == 1; the kernel is mu_h(x') = p0(x') e_anchor + sum_k c_k(x') e_{S_k}
/// with sum_x' c_k = 0 and sum_k |c_k(x')| <= 0.9 p0(x'). The sparse core
/// (theta, mu, on-support feature values) depends on the seed only, not on d.
SparseLinearMdp build_random_sparse_mdp(const MdpConfig& cfg, std::uint64_t seed);

/// Uniform policy, or with pi_star_weight > 0 the per-step mixture
/// (1 - w) * uniform + w * pi*.
TabularPolicy behavior_policy(const SparseLinearMdp& m, double pi_star_weight);

FeatureFamily parse_feature_family(const std::string& s);
CoverageMode parse_coverage_mode(const std::string& s);
std::string to_string(FeatureFamily f);
std::string to_string(CoverageMode c);

}  // namespace sorl
