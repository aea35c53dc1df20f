#include "sorl/lsvi.hpp"

#include "sorl/combinatorics.hpp"
#include "sorl/errors.hpp"
#include "sorl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sorl {

BonusKind parse_bonus_kind(const std::string& s) {
    if (s == "zero") return BonusKind::zero;
    if (s == "sparse_max") return BonusKind::sparse_max;
    if (s == "dense") return BonusKind::dense;
    throw ConfigError("unknown bonus kind: " + s);
}

std::string to_string(BonusKind k) {
    switch (k) {
        case BonusKind::zero: return "zero";
        case BonusKind::sparse_max: return "sparse_max";
        default: return "dense";
    }
}

std::vector<double> default_sparse_alpha(int H, int d, int s, int n, double lambda, double epsilon, double delta) {
    std::vector<double> a(H);
    const double core = std::pow(s, 0.25) * std::sqrt(std::log(static_cast<double>(d) * H * n / delta)) /
                        std::pow(n, 0.25);
    for (int h = 0; h < H; ++h) a[h] = (H - h) * (core + std::sqrt(lambda) + std::sqrt(epsilon));
    return a;
}

std::vector<double> default_dense_alpha(int H, int d, int n, double lambda, double epsilon, double delta) {
    std::vector<double> a(H);
    const double core = std::sqrt(d * std::log(static_cast<double>(d) * H * n / delta) / n);
    for (int h = 0; h < H; ++h) a[h] = (H - h) * (core + std::sqrt(lambda) + std::sqrt(epsilon));
    return a;
}

namespace {

bool is_diagonal(const Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (i != j && m(i, j) != 0.0) return false;
    return true;
}

// max over |S| = k of phi_S^T (Sigma_S)^{-1} phi_S for every row of phi. The
// quadratic form only grows when S grows, so size k = min(two_s, d) suffices.
Eigen::VectorXd sparse_max_quadratic(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& sigma, int two_s) {
    const int d = static_cast<int>(sigma.rows());
    const int k = std::min(two_s, d);
    const Eigen::Index rows = phi.rows();
    Eigen::VectorXd best = Eigen::VectorXd::Zero(rows);
    if (k <= 0) return best;
    if (is_diagonal(sigma)) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            std::vector<double> v(d);
            for (int i = 0; i < d; ++i) v[i] = phi(r, i) * phi(r, i) / sigma(i, i);
            std::partial_sort(v.begin(), v.begin() + k, v.end(), std::greater<>());
            best(r) = std::accumulate(v.begin(), v.begin() + k, 0.0);
        }
        return best;
    }
    if (!binomial_at_most(d, k, 1e6)) throw SearchSpaceTooLarge("sparse_max_bonus: C(d, 2s) exceeds 1e6");
    std::vector<int> S = first_combination(k);
    Eigen::MatrixXd sub(k, k), phiS(rows, k);
    do {
        for (int a = 0; a < k; ++a) {
            phiS.col(a) = phi.col(S[a]);
            for (int b = 0; b < k; ++b) sub(a, b) = sigma(S[a], S[b]);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(sub);
        if (llt.info() != Eigen::Success) throw std::invalid_argument("sparse_max_bonus: Sigma_hat is not positive definite");
        // ||L^{-1} phi_S||^2 = phi_S^T Sigma_S^{-1} phi_S
        const Eigen::MatrixXd sol = llt.matrixL().solve(phiS.transpose());
        const Eigen::VectorXd q = sol.colwise().squaredNorm().transpose();
        best = best.cwiseMax(q);
    } while (next_combination(S, d));
    return best;
}

}  // namespace

double sparse_max_bonus(const Eigen::VectorXd& phi, const Eigen::MatrixXd& sigma_hat, double alpha, int two_s) {
    const Eigen::MatrixXd row = phi.transpose();
    return alpha * std::sqrt(sparse_max_quadratic(row, sigma_hat, two_s)(0));
}

Eigen::MatrixXd sparse_max_bonus_table(const FeatureTable& f, const Eigen::MatrixXd& sigma_hat, double alpha, int two_s) {
    const Eigen::VectorXd q = sparse_max_quadratic(f.phi, sigma_hat, two_s);
    Eigen::MatrixXd t(f.num_states, f.num_actions);
    for (int x = 0; x < f.num_states; ++x)
        for (int a = 0; a < f.num_actions; ++a) t(x, a) = alpha * std::sqrt(q(f.row(x, a)));
    return t;
}

Eigen::MatrixXd dense_bonus_table(const FeatureTable& f, const Eigen::MatrixXd& sigma_hat, double alpha) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_hat);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("dense bonus: Sigma_hat is not positive definite");
    const Eigen::MatrixXd sol = llt.matrixL().solve(f.phi.transpose());
    const Eigen::VectorXd q = sol.colwise().squaredNorm().transpose();
    Eigen::MatrixXd t(f.num_states, f.num_actions);
    for (int x = 0; x < f.num_states; ++x)
        for (int a = 0; a < f.num_actions; ++a) t(x, a) = alpha * std::sqrt(q(f.row(x, a)));
    return t;
}

LsviOutput run_lsvi(const Dataset& ds, const FeatureTable& f, const LsviOptions& opts) {
    if (ds.size() < 1) throw std::invalid_argument("run_lsvi: empty dataset");
    const int H = ds.horizon(), n = ds.size(), d = f.dim();
    const double lambda = opts.lambda >= 0.0 ? opts.lambda : default_lambda(opts.s, n, d, opts.delta);

    LsviOutput out;
    out.q_weights.resize(H);
    out.clipped_q.resize(H);
    out.bonus.resize(H);
    out.sigma_hat.resize(H);
    out.reports.resize(H);
    out.policy.probs.resize(H);

    out.alpha = opts.bonus.alpha;
    if (out.alpha.empty()) {
        if (opts.bonus.kind == BonusKind::sparse_max)
            out.alpha = default_sparse_alpha(H, d, opts.s, n, lambda, opts.epsilon, opts.delta);
        else if (opts.bonus.kind == BonusKind::dense)
            out.alpha = default_dense_alpha(H, d, n, lambda, opts.epsilon, opts.delta);
        else
            out.alpha.assign(H, 0.0);
        for (double& a : out.alpha) a *= opts.bonus.alpha_scale;
    }
    if (static_cast<int>(out.alpha.size()) != H) throw ConfigError("bonus alpha must have one entry per step");

    Eigen::MatrixXd q_next = Eigen::MatrixXd::Zero(f.num_states, f.num_actions);
    for (int h = H - 1; h >= 0; --h) {
        const double budget = H - h;
        RegressionProblem p = srle_dataset_for_policy(ds, f, h, nullptr, q_next, TargetMode::greedy);
        p.s = opts.s;
        p.B = budget;
        p.sigma = budget;
        p.epsilon = opts.epsilon;
        p.lambda = lambda;
        p.delta = opts.delta;
        out.reports[h] = run_oracle(opts.oracle, p);
        out.q_weights[h] = out.reports[h].w_hat;
        out.sigma_hat[h] = empirical_covariance(ds, f, h, lambda, opts.epsilon);

        switch (opts.bonus.kind) {
            case BonusKind::zero: out.bonus[h] = Eigen::MatrixXd::Zero(f.num_states, f.num_actions); break;
            case BonusKind::sparse_max:
                out.bonus[h] = sparse_max_bonus_table(f, out.sigma_hat[h], out.alpha[h], opts.bonus.two_s);
                break;
            case BonusKind::dense: out.bonus[h] = dense_bonus_table(f, out.sigma_hat[h], out.alpha[h]); break;
        }
        out.clipped_q[h] = (f.linear(out.q_weights[h]) - out.bonus[h]).cwiseMax(0.0).cwiseMin(budget);

        Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(f.num_states, f.num_actions);
        for (int x = 0; x < f.num_states; ++x) {
            int best = 0;
            for (int a = 1; a < f.num_actions; ++a)
                if (out.clipped_q[h](x, a) > out.clipped_q[h](x, best)) best = a;
            pi(x, best) = 1.0;
        }
        out.policy.probs[h] = std::move(pi);
        q_next = out.clipped_q[h];
    }
    return out;
}

MaxGapResult demo_max_expectation_gap(int d, int s, double lambda, int num_samples, std::uint64_t seed) {
    if (num_samples < 2) throw std::invalid_argument("demo_max_expectation_gap: need at least 2 samples");
    if (!(lambda > 0.0)) throw std::invalid_argument("demo_max_expectation_gap: lambda must be positive");
    CounterRng g = make_stream(seed, "max_gap");
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < num_samples; ++i) {
        int K = 0;
        for (int j = 0; j < d; ++j) K += static_cast<int>(g.next() >> 63);
        const double v = std::min(2 * s, K) / lambda;
        sum += v;
        sumsq += v * v;
    }
    MaxGapResult r;
    r.lhs = sum / num_samples;
    const double var = std::max(0.0, (sumsq - num_samples * r.lhs * r.lhs) / (num_samples - 1));
    r.lhs_se = std::sqrt(var / num_samples);
    r.rhs = s / lambda;
    r.bound = (1.0 - 2.0 * std::exp(-d / 8.0)) * s / lambda;
    return r;
}

LsviDiagnostics lsvi_diagnostics(const SparseLinearMdp& m, const LsviOutput& out) {
    const int H = m.horizon();
    LsviDiagnostics diag;
    diag.bellman_error.resize(H);
    for (int h = 0; h < H; ++h) {
        const Eigen::MatrixXd next =
            h + 1 < H ? out.clipped_q[h + 1] : Eigen::MatrixXd::Zero(m.num_states(), m.num_actions());
        diag.bellman_error[h] = bellman_apply_greedy(m, h, next) - out.clipped_q[h];
    }
    const Policy hat(out.policy);
    const auto occ_hat = occupancy_measures(m, hat);
    const auto occ_opt = occupancy_measures(m, Policy(exact_optimal(m).policy));
    for (int h = 0; h < H; ++h) {
        diag.bonus_under_opt += occ_opt[h].cwiseProduct(out.bonus[h]).sum();
        diag.bonus_under_hat += occ_hat[h].cwiseProduct(out.bonus[h]).sum();
    }
    diag.subopt = suboptimality(m, hat);
    return diag;
}

std::string lsvi_diagnostics_csv(const LsviDiagnostics& diag, const LsviOutput& out) {
    std::ostringstream os;
    os.precision(17);
    os << "h,x,a,bellman_err,bonus\n";
    for (std::size_t h = 0; h < diag.bellman_error.size(); ++h) {
        const auto& e = diag.bellman_error[h];
        for (Eigen::Index x = 0; x < e.rows(); ++x)
            for (Eigen::Index a = 0; a < e.cols(); ++a)
                os << h + 1 << ',' << x << ',' << a << ',' << e(x, a) << ',' << out.bonus[h](x, a) << '\n';
    }
    return os.str();
}

}  // namespace sorl
