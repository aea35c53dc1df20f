#pragma once

#include "sorl/datagen.hpp"
#include "sorl/mdp.hpp"
#include "sorl/srle.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sorl {

enum class CriticVariant { uniform_coverage, pess_opt };
enum class CriticSolver { alternating, exact_tiny };
CriticVariant parse_critic_variant(const std::string& s);
CriticSolver parse_critic_solver(const std::string& s);
std::string to_string(CriticVariant v);
std::string to_string(CriticSolver s);

struct CriticSpec {
    CriticVariant variant = CriticVariant::uniform_coverage;
    Oracle oracle = Oracle::srle1;
    std::vector<double> alpha;  // per step; empty means the default schedule
    double alpha_scale = 1.0;   // multiplies the default schedule
    double lambda = -1.0;       // < 0 selects default_lambda
    double delta = 0.1;
    int s = 2;
    double epsilon = 0.0;
    CriticSolver solver = CriticSolver::alternating;
    int max_iters = 1;          // outer backward passes (alternating)
    int grid_points = 201;      // per-coordinate grid (exact_tiny)
    std::vector<Eigen::VectorXd> warm_start;  // per-step initial points for iterative oracles
};

struct CriticOutput {
    std::vector<Eigen::VectorXd> weights;   // per h
    std::vector<Eigen::VectorXd> centers;   // per h, oracle fits the radii are measured from
    std::vector<Eigen::MatrixXd> q;         // per h, X x A tables used as the next-step input
    std::vector<Eigen::MatrixXd> sigma_hat; // per h
    std::vector<double> alpha;              // per h (pess_opt)
    std::vector<double> slack;              // per h, max constraint violation (<= 0 when feasible)
    double pessimistic_value = 0.0;         // sum_a pi_1(a|x1) q_1(x1, a)
    int passes = 0;
};

/// Per-step default radii for pess_opt. srle3 adds an eps^{1/4} term.
std::vector<double> default_critic_alpha(Oracle oracle, int H, int d, int s, int n, double lambda, double epsilon,
                                         double delta);

/// Backward pass: w_h = oracle fit of the policy targets, scaled into the l1
/// ball of radius H - h; q_h = clip(<phi, w_h>, -(H - h), H - h).
CriticOutput critic_uniform(const Dataset& ds, const FeatureTable& f, const Policy& pi, const CriticSpec& spec);

/// Pessimistic critic. Each w_h minimizes the empirical-occupancy surrogate
/// <g_h, w> over {||w - c_h||^2_{Sigma_h} <= alpha_h^2} with ||w||_1 <= H - h
/// and ||w||_0 <= s, where c_h is the oracle fit given q_{h+1} = <phi, w_{h+1}>.
CriticOutput critic_pessopt(const Dataset& ds, const FeatureTable& f, const Policy& pi, const CriticSpec& spec);

CriticOutput run_critic(const Dataset& ds, const FeatureTable& f, const Policy& pi, const CriticSpec& spec);

/// The joint pessimistic objective sum_a pi_1(a|x1) <phi(x1,a), w_1> evaluated for a candidate.
double pessopt_objective(const Dataset& ds, const FeatureTable& f, const Policy& pi, const Eigen::VectorXd& w1);

/// upsilon_h + eta * w_h for every step.
std::vector<Eigen::VectorXd> actor_step(const std::vector<Eigen::VectorXd>& upsilon, const std::vector<Eigen::VectorXd>& w,
                                        double eta);

/// sqrt(log|A| / N) for the uniform critic, sqrt(log|A| / (H^2 N)) for pess_opt.
double default_eta(CriticVariant v, int num_actions, int H, int n);

struct TraceRow {
    int t = 0;
    double pessimistic_value = 0.0;
    double subopt = 0.0;  // NaN unless a true MDP was supplied
    double max_slack = 0.0;
};

struct ActorCriticResult {
    Policy mixture;
    std::vector<TraceRow> trace;
    std::vector<CriticOutput> critics;  // kept only when requested
};

struct ActorCriticOptions {
    CriticSpec critic;
    int T = 50;
    double eta = -1.0;  // < 0 selects default_eta
    bool keep_critics = false;
    const SparseLinearMdp* true_mdp = nullptr;  // optional, fills trace subopt
};

/// upsilon_1 = 0; each round runs the critic on pi_{upsilon_t} and adds eta w_t
/// to the logits. Returns the uniform mixture of pi_{upsilon_1..T}. The loop is
/// deterministic; seed only labels the run.
ActorCriticResult run_actor_critic(const Dataset& ds, const FeatureTable& f, const ActorCriticOptions& opts,
                                   std::uint64_t seed);

std::string trace_csv(const std::vector<TraceRow>& trace);

struct InducedMdpDiag {
    std::vector<Eigen::MatrixXd> perturbed_reward;  // per h: r_h + q_h - B^pi_h q_{h+1}
    double value_match_error = 0.0;                 // max |Q_{M_hat} - q|
    double pessimistic_value = 0.0;                 // sum_a pi_1(a|x1) q_1(x1, a)
    double true_value = 0.0;                        // V^pi_1(x1)
    double pessimism_gap() const { return pessimistic_value - true_value; }
};

/// Test-only: requires the true MDP.
InducedMdpDiag induced_mdp_diagnostic(const SparseLinearMdp& m, const Policy& pi, const CriticOutput& critic);

/// Values of pi on the MDP m with the reward table replaced per step.
ValueTables evaluate_with_rewards(const SparseLinearMdp& m, const Policy& pi, const std::vector<Eigen::MatrixXd>& rewards);

}  // namespace sorl
