#include "sorl/srle.hpp"

#include "sorl/combinatorics.hpp"
#include "sorl/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sorl {

Oracle parse_oracle(const std::string& s) {
    if (s == "srle1") return Oracle::srle1;
    if (s == "srle2") return Oracle::srle2;
    if (s == "srle3") return Oracle::srle3;
    if (s == "ols") return Oracle::ols;
    throw ConfigError("unknown oracle: " + s);
}

std::string to_string(Oracle o) {
    switch (o) {
        case Oracle::srle1: return "srle1";
        case Oracle::srle2: return "srle2";
        case Oracle::srle3: return "srle3";
        default: return "ols";
    }
}

void validate(const RegressionProblem& p) {
    if (p.n() < 1) throw std::invalid_argument("regression problem has no rows");
    if (p.y.size() != p.n()) throw std::invalid_argument("regression problem: y length differs from Z rows");
    if (p.d() < 1) throw std::invalid_argument("regression problem has no columns");
    if (!(p.epsilon >= 0.0 && p.epsilon < 0.5)) throw BadEpsilon("regression problem: epsilon must lie in [0, 1/2)");
    if (!(p.B > 0.0)) throw std::invalid_argument("regression problem: B must be positive");
    if (p.lambda < 0.0) throw std::invalid_argument("regression problem: lambda must be >= 0");
    if (p.s < 1) throw std::invalid_argument("regression problem: s must be >= 1");
}

int gradient_trim_count(int n, int d, double epsilon, double delta, double c) {
    const double frac = c * (epsilon + std::sqrt(std::log(2.0 * d / delta) / n));
    const int cap = (n - 1) / 2;
    return std::clamp(static_cast<int>(std::floor(frac * n)), 0, cap);
}

double trimmed_mean(std::vector<double> v, int trim) {
    const int n = static_cast<int>(v.size());
    if (n == 0) return 0.0;
    trim = std::clamp(trim, 0, (n - 1) / 2);
    if (trim > 0) {
        std::nth_element(v.begin(), v.begin() + trim, v.end());
        std::nth_element(v.begin() + trim, v.end() - trim - 1, v.end());
    }
    double sum = 0.0;
    for (int i = trim; i < n - trim; ++i) sum += v[i];
    return sum / (n - 2 * trim);
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double B) {
    if (v.lpNorm<1>() <= B) return v;
    std::vector<double> u(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) u[i] = std::abs(v(i));
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, tau = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cum += u[k];
        const double t = (cum - B) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) tau = t;
    }
    Eigen::VectorXd w(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double m = std::max(std::abs(v(i)) - tau, 0.0);
        w(i) = v(i) >= 0.0 ? m : -m;
    }
    return w;
}

Eigen::VectorXd scale_into_l1_ball(const Eigen::VectorXd& v, double B, bool* binding) {
    const double norm = v.lpNorm<1>();
    const bool bind = norm > B;
    if (binding) *binding = bind;
    return bind ? Eigen::VectorXd(v * (B / norm)) : v;
}

int retained_count(int n, double epsilon) {
    return std::clamp(static_cast<int>(std::ceil((1.0 - epsilon) * n - 1e-9)), 1, n);
}

std::vector<int> smallest_residual_rows(const Eigen::VectorXd& residual, int m) {
    const int n = static_cast<int>(residual.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto less = [&](int a, int b) {
        const double ra = residual(a) * residual(a), rb = residual(b) * residual(b);
        return ra < rb || (ra == rb && a < b);
    };
    if (m < n) std::nth_element(idx.begin(), idx.begin() + m, idx.end(), less);
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double trimmed_objective(const RegressionProblem& p, const Eigen::VectorXd& w, const std::vector<int>& rows) {
    double sum = 0.0;
    for (int i : rows) {
        const double r = p.y(i) - p.Z.row(i).dot(w);
        sum += r * r;
    }
    return sum / p.n() + p.lambda * w.squaredNorm();
}

double default_lambda(int s, int n, int d, double delta) {
    return std::max(0.0, static_cast<double>(s) / n * std::log(static_cast<double>(d) / (s * delta)));
}

std::vector<int> nonzero_support(const Eigen::VectorXd& w) {
    std::vector<int> s;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) != 0.0) s.push_back(static_cast<int>(i));
    return s;
}

double sigma_norm_error(const Eigen::VectorXd& w_hat, const Eigen::VectorXd& w_ref, const Eigen::MatrixXd& sigma) {
    const Eigen::VectorXd diff = w_hat - w_ref;
    const double q = diff.dot(sigma * diff);
    if (q < -1e-10) throw NegativeQuadratic("sigma_norm_error: quadratic form is negative");
    return std::sqrt(std::max(q, 0.0));
}

namespace {

std::vector<int> all_rows(int n) {
    std::vector<int> r(n);
    std::iota(r.begin(), r.end(), 0);
    return r;
}

// Coordinatewise trimmed mean of per-row gradients (z_i^T w - y_i) z_i, plus lambda w.
Eigen::VectorXd trimmed_gradient(const RegressionProblem& p, const Eigen::VectorXd& w, int trim,
                                 std::vector<double>& scratch) {
    const Eigen::VectorXd resid = p.Z * w - p.y;
    Eigen::VectorXd g(p.d());
    scratch.resize(p.n());
    for (int j = 0; j < p.d(); ++j) {
        for (int i = 0; i < p.n(); ++i) scratch[i] = resid(i) * p.Z(i, j);
        g(j) = trimmed_mean(scratch, trim);
    }
    return g + p.lambda * w;
}

double full_objective(const RegressionProblem& p, const Eigen::VectorXd& w) {
    return (p.y - p.Z * w).squaredNorm() / p.n() + p.lambda * w.squaredNorm();
}

EstimatorReport finish(const RegressionProblem& p, Eigen::VectorXd w, int iters, bool converged) {
    EstimatorReport r;
    r.w_hat = std::move(w);
    r.support = nonzero_support(r.w_hat);
    r.trimmed_set = all_rows(p.n());
    r.objective = full_objective(p, r.w_hat);
    r.iterations = iters;
    r.converged = converged;
    return r;
}

}  // namespace

EstimatorReport srle1(const RegressionProblem& p, const Srle1Options& opts) {
    validate(p);
    const int trim = gradient_trim_count(p.n(), p.d(), p.epsilon, p.delta, opts.trim_c);
    Eigen::MatrixXd G = p.Z.transpose() * p.Z / p.n();
    G.diagonal().array() += p.lambda;
    const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const double eta = opts.step_scale / std::max(L, 1e-12);

    Eigen::VectorXd w = Eigen::VectorXd::Zero(p.d());
    if (opts.warm_start.size() == p.d()) w = project_l1_ball(opts.warm_start, p.B);
    Eigen::VectorXd look = w;  // extrapolated point (accelerated variant)
    double momentum = 1.0;
    std::vector<double> scratch;
    int it = 0;
    bool converged = false;
    for (; it < opts.max_iters; ++it) {
        const Eigen::VectorXd g = trimmed_gradient(p, look, trim, scratch);
        Eigen::VectorXd next = project_l1_ball(look - eta * g, p.B);
        if (!next.allFinite()) throw NonFinite("srle1: iterate is not finite");
        const double step = (next - w).norm();
        if (opts.accelerated) {
            // Momentum with gradient-based restart.
            if ((look - next).dot(next - w) > 0.0) {
                momentum = 1.0;
                look = next;
            } else {
                const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
                look = next + ((momentum - 1.0) / m_next) * (next - w);
                momentum = m_next;
            }
        } else {
            look = next;
        }
        w = std::move(next);
        if (step <= opts.tol * std::max(1.0, w.norm())) {
            converged = true;
            ++it;
            break;
        }
    }
    EstimatorReport r = finish(p, std::move(w), it, converged);
    if (!std::isfinite(r.objective)) throw NonFinite("srle1: loss diverged");
    return r;
}

// ---------------------------------------------------------------- srle2

namespace {

struct SupportFit {
    Eigen::VectorXd w;  // full dimension
    std::vector<int> rows;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    bool binding = false;
    std::vector<double> trace;
};

// argmin_w (1/N) ||y_C - Z_{C,S} w||^2 + lambda ||w||^2, solved on the augmented
// least-squares system for stability; minimum-norm when rank deficient.
Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& Zs, const Eigen::VectorXd& y, const std::vector<int>& rows, double nl) {
    const int k = static_cast<int>(Zs.cols());
    const int m = static_cast<int>(rows.size());
    Eigen::MatrixXd Aug = Eigen::MatrixXd::Zero(m + (nl > 0.0 ? k : 0), k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(Aug.rows());
    for (int i = 0; i < m; ++i) {
        Aug.row(i) = Zs.row(rows[i]);
        b(i) = y(rows[i]);
    }
    if (nl > 0.0) Aug.bottomRows(k).diagonal().setConstant(std::sqrt(nl));
    return Aug.completeOrthogonalDecomposition().solve(b);
}

SupportFit alternate(const RegressionProblem& p, const std::vector<int>& S, std::vector<int> rows, int keep,
                     int max_iters) {
    const int k = static_cast<int>(S.size());
    Eigen::MatrixXd Zs(p.n(), k);
    for (int j = 0; j < k; ++j) Zs.col(j) = p.Z.col(S[j]);
    const double nl = p.n() * p.lambda;

    auto embed = [&](const Eigen::VectorXd& ws) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(p.d());
        for (int j = 0; j < k; ++j) w(S[j]) = ws(j);
        return w;
    };

    SupportFit fit;
    Eigen::VectorXd ws = Eigen::VectorXd::Zero(k);
    for (int it = 0; it < max_iters; ++it) {
        ws = ridge_fit(Zs, p.y, rows, nl);
        fit.trace.push_back(trimmed_objective(p, embed(ws), rows));
        std::vector<int> next = smallest_residual_rows(p.y - Zs * ws, keep);
        fit.trace.push_back(trimmed_objective(p, embed(ws), next));
        fit.iterations = it + 1;
        if (next == rows) {
            fit.converged = true;
            break;
        }
        rows = std::move(next);
    }
    Eigen::VectorXd w = embed(ws);
    w = scale_into_l1_ball(w, p.B, &fit.binding);
    rows = smallest_residual_rows(p.y - p.Z * w, keep);
    fit.w = std::move(w);
    fit.rows = std::move(rows);
    fit.objective = trimmed_objective(p, fit.w, fit.rows);
    return fit;
}

// Better of the two starts: all rows (plain fit first) and w = 0 (trim by |y| first).
SupportFit fit_support(const RegressionProblem& p, const std::vector<int>& S, int keep, int max_iters) {
    SupportFit a = alternate(p, S, all_rows(p.n()), keep, max_iters);
    SupportFit b = alternate(p, S, smallest_residual_rows(p.y, keep), keep, max_iters);
    return b.objective < a.objective ? b : a;
}

std::vector<int> iht_support(const RegressionProblem& p, int k, int keep, int iters) {
    Eigen::MatrixXd G = p.Z.transpose() * p.Z / p.n();
    const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff() +
                     p.lambda;
    const double eta = 1.0 / std::max(L, 1e-12);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p.d());
    std::vector<int> rows = all_rows(p.n());
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.d());
        for (int i : rows) grad += (p.Z.row(i).dot(w) - p.y(i)) * p.Z.row(i).transpose();
        grad = grad / p.n() + p.lambda * w;
        Eigen::VectorXd v = w - eta * grad;
        std::vector<int> idx(p.d());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return std::abs(v(a)) > std::abs(v(b)); });
        w.setZero();
        for (int j = 0; j < k; ++j) w(idx[j]) = v(idx[j]);
        rows = smallest_residual_rows(p.y - p.Z * w, keep);
    }
    std::vector<int> idx(p.d());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return std::abs(w(a)) > std::abs(w(b)); });
    std::vector<int> S(idx.begin(), idx.begin() + k);
    std::sort(S.begin(), S.end());
    return S;
}

}  // namespace

EstimatorReport srle2(const RegressionProblem& p, const Srle2Options& opts) {
    validate(p);
    const int d = p.d();
    const int k = std::min(p.s, d);
    const int keep = retained_count(p.n(), p.epsilon);

    SupportFit best;
    bool have = false;
    auto consider = [&](const std::vector<int>& S) {
        SupportFit f = fit_support(p, S, keep, opts.max_alt_iters);
        if (!have || f.objective < best.objective) {
            best = std::move(f);
            have = true;
        }
    };

    if (opts.support_search == SupportSearch::exhaustive) {
        if (!binomial_at_most(d, k, 1e6))
            throw SearchSpaceTooLarge("srle2: C(d, s) exceeds 1e6 candidate supports");
        std::vector<int> S = first_combination(k);
        do {
            consider(S);
        } while (next_combination(S, d));
    } else {
        consider(iht_support(p, k, keep, opts.iht_iters));
    }

    EstimatorReport r;
    r.w_hat = best.w;
    r.support = nonzero_support(best.w);
    r.trimmed_set = best.rows;
    r.objective = best.objective;
    r.iterations = best.iterations;
    r.converged = best.converged;
    r.l1_binding = best.binding;
    r.objective_trace = best.trace;
    return r;
}

// ---------------------------------------------------------------- srle3

namespace {

// grad of 0.5 ||w||_r^2: ||w||_r^{2-r} sign(w_i) |w_i|^{r-1}.
Eigen::VectorXd norm_sq_gradient(const Eigen::VectorXd& w, double r) {
    const double norm = w.array().abs().pow(r).sum();
    if (norm == 0.0) return Eigen::VectorXd::Zero(w.size());
    const double scale = std::pow(norm, (2.0 - r) / r);
    Eigen::VectorXd g(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double a = std::abs(w(i));
        g(i) = a == 0.0 ? 0.0 : std::copysign(scale * std::pow(a, r - 1.0), w(i));
    }
    return g;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double tau) {
    return v.unaryExpr([tau](double x) { return std::copysign(std::max(std::abs(x) - tau, 0.0), x); });
}

// Bregman projection onto the l1 ball: w = grad psi*(soft(theta, tau)) with the
// smallest tau >= 0 giving ||w||_1 <= B.
Eigen::VectorXd bregman_l1_projection(const Eigen::VectorXd& theta, double q, double B) {
    Eigen::VectorXd w = norm_sq_gradient(theta, q);
    if (w.lpNorm<1>() <= B) return w;
    double lo = 0.0, hi = theta.cwiseAbs().maxCoeff();
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (norm_sq_gradient(soft_threshold(theta, mid), q).lpNorm<1>() > B) lo = mid;
        else hi = mid;
    }
    w = norm_sq_gradient(soft_threshold(theta, hi), q);
    return scale_into_l1_ball(w, B);
}

}  // namespace

EstimatorReport srle3(const RegressionProblem& p, const Srle3Options& opts) {
    validate(p);
    const int d = p.d();
    const int trim = gradient_trim_count(p.n(), d, p.epsilon, p.delta, opts.trim_c);
    const bool euclid = d <= 2;
    const double pe = euclid ? 2.0 : 1.0 + 1.0 / std::log(static_cast<double>(d));
    const double qe = pe / (pe - 1.0);

    Eigen::MatrixXd G = p.Z.transpose() * p.Z / p.n();
    G.diagonal().array() += p.lambda;
    double eta;
    if (euclid) {
        const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
        eta = opts.step_scale / std::max(L, 1e-12);
    } else {
        // psi is (p-1)-strongly convex in ||.||_p; the loss is L-smooth in ||.||_p
        // with L <= d^{2(p-1)/p} max |G_ij|.
        const double L = std::pow(d, 2.0 * (pe - 1.0) / pe) * G.cwiseAbs().maxCoeff();
        eta = opts.step_scale * (pe - 1.0) / std::max(L, 1e-12);
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    if (opts.warm_start.size() == d) w = scale_into_l1_ball(opts.warm_start, p.B);
    std::vector<double> scratch;
    int it = 0;
    bool converged = false;
    for (; it < opts.max_iters; ++it) {
        const Eigen::VectorXd g = trimmed_gradient(p, w, trim, scratch);
        Eigen::VectorXd next;
        if (euclid) {
            next = project_l1_ball(w - eta * g, p.B);
        } else {
            const Eigen::VectorXd theta = norm_sq_gradient(w, pe) - eta * g;
            next = bregman_l1_projection(theta, qe, p.B);
        }
        if (!next.allFinite()) throw NonFinite("srle3: iterate is not finite");
        const double step = (next - w).norm();
        w = std::move(next);
        if (step <= opts.tol * std::max(1.0, w.norm())) {
            converged = true;
            ++it;
            break;
        }
    }
    EstimatorReport r = finish(p, std::move(w), it, converged);
    if (!std::isfinite(r.objective)) throw NonFinite("srle3: loss diverged");
    return r;
}

EstimatorReport ols(const RegressionProblem& p) {
    validate(p);
    Eigen::MatrixXd G = p.Z.transpose() * p.Z;
    G.diagonal().array() += p.n() * std::max(p.lambda, 1e-10);
    Eigen::VectorXd w = G.ldlt().solve(p.Z.transpose() * p.y);
    bool binding = false;
    w = scale_into_l1_ball(w, p.B, &binding);
    EstimatorReport r = finish(p, std::move(w), 1, true);
    r.l1_binding = binding;
    return r;
}

EstimatorReport run_oracle(Oracle o, const RegressionProblem& p, const Eigen::VectorXd* warm_start) {
    switch (o) {
        case Oracle::srle1: {
            Srle1Options opts;
            if (warm_start) opts.warm_start = *warm_start;
            return srle1(p, opts);
        }
        case Oracle::srle2: return srle2(p);
        case Oracle::srle3: {
            Srle3Options opts;
            if (warm_start) opts.warm_start = *warm_start;
            return srle3(p, opts);
        }
        default: return ols(p);
    }
}

}  // namespace sorl
