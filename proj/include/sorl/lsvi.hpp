#pragma once

#include "sorl/datagen.hpp"
#include "sorl/mdp.hpp"
#include "sorl/srle.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sorl {

enum class BonusKind {
    zero,
    sparse_max,  // alpha_h * max_{|S| <= 2s} ||phi_S||_{(Sigma_hat_S)^{-1}}
    dense,       // alpha_h * ||phi||_{Sigma_hat^{-1}}
};
BonusKind parse_bonus_kind(const std::string& s);
std::string to_string(BonusKind k);

struct BonusSpec {
    BonusKind kind = BonusKind::zero;
    std::vector<double> alpha;  // per step; empty means the default schedule
    double alpha_scale = 1.0;   // multiplies the default schedule
    int two_s = 2;
};

struct LsviOptions {
    Oracle oracle = Oracle::srle2;
    BonusSpec bonus;
    int s = 2;
    double epsilon = 0.0;  // corruption level assumed by the oracle and covariance
    double lambda = -1.0;  // < 0 selects default_lambda
    double delta = 0.1;
};

struct LsviOutput {
    std::vector<Eigen::VectorXd> q_weights;    // per h
    std::vector<Eigen::MatrixXd> clipped_q;    // per h, X x A, in [0, H - h]
    std::vector<Eigen::MatrixXd> bonus;        // per h, X x A
    std::vector<Eigen::MatrixXd> sigma_hat;    // per h
    std::vector<EstimatorReport> reports;      // per h
    std::vector<double> alpha;                 // per h, as used
    TabularPolicy policy;                      // greedy in clipped_q, ties to the lowest action
};

/// Backward pessimistic value iteration:
/// Q_h = clip(<phi, w_h> - Gamma_h, 0, H - h) with w_h the oracle fit of the greedy targets.
LsviOutput run_lsvi(const Dataset& ds, const FeatureTable& f, const LsviOptions& opts);

/// alpha_h = (H - h) (s^{1/4} sqrt(log(d H N / delta)) / N^{1/4} + sqrt(lambda) + sqrt(eps)).
std::vector<double> default_sparse_alpha(int H, int d, int s, int n, double lambda, double epsilon, double delta);
/// alpha_h = (H - h) (sqrt(d log(d H N / delta) / N) + sqrt(lambda) + sqrt(eps)).
std::vector<double> default_dense_alpha(int H, int d, int n, double lambda, double epsilon, double delta);

/// alpha * max over |S| <= two_s of sqrt(phi_S^T (Sigma_S)^{-1} phi_S), on principal submatrices.
double sparse_max_bonus(const Eigen::VectorXd& phi, const Eigen::MatrixXd& sigma_hat, double alpha, int two_s);

/// Bonus for every row of the feature table (X x A), sharing the per-support factorizations.
Eigen::MatrixXd sparse_max_bonus_table(const FeatureTable& f, const Eigen::MatrixXd& sigma_hat, double alpha, int two_s);
Eigen::MatrixXd dense_bonus_table(const FeatureTable& f, const Eigen::MatrixXd& sigma_hat, double alpha);

struct MaxGapResult {
    double lhs = 0.0;       // E[max_{|S|=2s} z_S^T (lambda I)^{-1} z_S]
    double rhs = 0.0;       // max_{|S|=2s} E[z_S^T (lambda I)^{-1} z_S] = s / lambda
    double bound = 0.0;     // (1 - 2 exp(-d/8)) s / lambda
    double lhs_se = 0.0;    // Monte-Carlo standard error of lhs
    double gap() const { return lhs - rhs; }
};

/// z ~ Bernoulli(1/2)^d; uses max_{|S|=2s} sum_{i in S} z_i = min(2s, sum z).
MaxGapResult demo_max_expectation_gap(int d, int s, double lambda, int num_samples, std::uint64_t seed);

/// Test-only diagnostics against the true MDP.
struct LsviDiagnostics {
    std::vector<Eigen::MatrixXd> bellman_error;  // (B_h Q_{h+1}) - Q_h, per h
    double bonus_under_opt = 0.0;                // sum_h E_{d^{pi*}}[Gamma_h]
    double bonus_under_hat = 0.0;                // sum_h E_{d^{pi_hat}}[Gamma_h]
    double subopt = 0.0;
};

LsviDiagnostics lsvi_diagnostics(const SparseLinearMdp& m, const LsviOutput& out);
/// CSV with header h,x,a,bellman_err,bonus.
std::string lsvi_diagnostics_csv(const LsviDiagnostics& diag, const LsviOutput& out);

}  // namespace sorl
