#pragma once

#include "sorl/regression.hpp"

#include <string>
#include <vector>

namespace sorl {

enum class Oracle { srle1, srle2, srle3, ols };
Oracle parse_oracle(const std::string& s);
std::string to_string(Oracle o);

struct Srle1Options {
    int max_iters = 3000;
    double step_scale = 1.0;  // multiplies 1 / lambda_max(Z^T Z / N)
    double trim_c = 1.0;
    double tol = 1e-10;
    bool accelerated = true;         // momentum with adaptive restart
    Eigen::VectorXd warm_start;      // optional initial point
};

enum class SupportSearch { exhaustive, iht };

struct Srle2Options {
    SupportSearch support_search = SupportSearch::exhaustive;
    int max_alt_iters = 50;
    int iht_iters = 300;
};

struct Srle3Options {
    int max_iters = 4000;
    double step_scale = 1.0;
    double trim_c = 1.0;
    double tol = 1e-10;
    Eigen::VectorXd warm_start;
};

/// Projected gradient on the l1 ball with coordinatewise trimmed-mean gradients.
EstimatorReport srle1(const RegressionProblem& p, const Srle1Options& opts = {});

/// l0-l2 trimmed least squares: exhaustive (or IHT-proposed) support search,
/// alternating ridge fit and trimming per support.
EstimatorReport srle2(const RegressionProblem& p, const Srle2Options& opts = {});

/// Mirror descent on the l1 ball under psi(w) = 0.5 ||w||_p^2, p = 1 + 1/ln d,
/// with the same trimmed-mean gradients as srle1.
EstimatorReport srle3(const RegressionProblem& p, const Srle3Options& opts = {});

/// Untrimmed ridge least squares, scaled into the l1 ball. Non-robust baseline.
EstimatorReport ols(const RegressionProblem& p);

/// Default options for each oracle; warm_start (if sized d) seeds the iterative oracles.
EstimatorReport run_oracle(Oracle o, const RegressionProblem& p, const Eigen::VectorXd* warm_start = nullptr);

/// sqrt((a - b)^T Sigma (a - b)); NegativeQuadratic below -1e-10.
double sigma_norm_error(const Eigen::VectorXd& w_hat, const Eigen::VectorXd& w_ref, const Eigen::MatrixXd& sigma);

/// Rows trimmed from each tail for trimmed-mean gradients:
/// floor(c * (eps + sqrt(log(2d/delta)/N)) * N), capped so one row remains.
int gradient_trim_count(int n, int d, double epsilon, double delta, double c);

/// Mean of v after dropping the `trim` smallest and `trim` largest entries.
double trimmed_mean(std::vector<double> v, int trim);

/// Euclidean projection onto {||w||_1 <= B}.
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double B);

/// v * B / ||v||_1 when ||v||_1 > B, else v.
Eigen::VectorXd scale_into_l1_ball(const Eigen::VectorXd& v, double B, bool* binding = nullptr);

/// ceil((1 - eps) N): size of the retained set.
int retained_count(int n, double epsilon);

/// Indices of the m smallest squared residuals, ties to the lower index, ascending.
std::vector<int> smallest_residual_rows(const Eigen::VectorXd& residual, int m);

/// (1/N) ||y_C - Z_C w||^2 + lambda ||w||^2.
double trimmed_objective(const RegressionProblem& p, const Eigen::VectorXd& w, const std::vector<int>& rows);

/// lambda = (s/N) log(d / (s delta)), floored at 0.
double default_lambda(int s, int n, int d, double delta);

std::vector<int> nonzero_support(const Eigen::VectorXd& w);

}  // namespace sorl
