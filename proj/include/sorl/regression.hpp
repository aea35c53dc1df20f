#pragma once

#include <Eigen/Dense>

#include <vector>

namespace sorl {

/// y = Z w* + noise, with up to an epsilon fraction of rows replaced.
struct RegressionProblem {
    Eigen::MatrixXd Z;  // N x d, ||row||_inf <= 1
    Eigen::VectorXd y;
    int s = 1;            // sparsity budget
    double B = 1.0;       // l1 budget
    double sigma = 1.0;   // noise scale bound
    double epsilon = 0.0; // corruption fraction
    double lambda = 0.0;  // ridge weight
    double delta = 0.1;   // failure probability

    int n() const { return static_cast<int>(Z.rows()); }
    int d() const { return static_cast<int>(Z.cols()); }
};

/// Throws std::invalid_argument or BadEpsilon when the problem is malformed.
void validate(const RegressionProblem& p);

struct EstimatorReport {
    Eigen::VectorXd w_hat;
    std::vector<int> support;      // nonzero coordinates of w_hat
    std::vector<int> trimmed_set;  // retained rows, ascending
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    bool l1_binding = false;       // proportional l1 scaling was applied
    std::vector<double> objective_trace;
};

}  // namespace sorl
