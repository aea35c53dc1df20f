#include "sorl/actor_critic.hpp"

#include "sorl/combinatorics.hpp"
#include "sorl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sorl {

CriticVariant parse_critic_variant(const std::string& s) {
    if (s == "uniform_coverage" || s == "uniform") return CriticVariant::uniform_coverage;
    if (s == "pess_opt" || s == "pessopt") return CriticVariant::pess_opt;
    throw ConfigError("unknown critic variant: " + s);
}

CriticSolver parse_critic_solver(const std::string& s) {
    if (s == "alternating") return CriticSolver::alternating;
    if (s == "exact_tiny") return CriticSolver::exact_tiny;
    throw ConfigError("unknown critic solver: " + s);
}

std::string to_string(CriticVariant v) { return v == CriticVariant::uniform_coverage ? "uniform_coverage" : "pess_opt"; }
std::string to_string(CriticSolver s) { return s == CriticSolver::alternating ? "alternating" : "exact_tiny"; }

std::vector<double> default_critic_alpha(Oracle oracle, int H, int d, int s, int n, double lambda, double epsilon,
                                         double delta) {
    const double logt = std::sqrt(std::log(static_cast<double>(d) * H * n / delta));
    double core;
    if (oracle == Oracle::srle3)
        core = logt / std::pow(n, 0.25) + std::pow(epsilon, 0.25);
    else
        core = std::pow(s, 0.25) * logt / std::pow(n, 0.25);
    std::vector<double> a(H);
    for (int h = 0; h < H; ++h) a[h] = (H - h) * (core + std::sqrt(lambda) + std::sqrt(epsilon));
    return a;
}

namespace {

struct Resolved {
    double lambda;
    std::vector<double> alpha;
};

Resolved resolve(const Dataset& ds, const FeatureTable& f, const CriticSpec& spec) {
    const int H = ds.horizon(), n = ds.size(), d = f.dim();
    Resolved r;
    r.lambda = spec.lambda >= 0.0 ? spec.lambda : default_lambda(spec.s, n, d, spec.delta);
    r.alpha = spec.alpha;
    if (r.alpha.empty()) {
        r.alpha = default_critic_alpha(spec.oracle, H, d, spec.s, n, r.lambda, spec.epsilon, spec.delta);
        for (double& a : r.alpha) a *= spec.alpha_scale;
    }
    if (static_cast<int>(r.alpha.size()) != H) throw ConfigError("critic alpha must have one entry per step");
    for (double a : r.alpha)
        if (a < 0.0) throw ConfigError("critic alpha must be nonnegative");
    return r;
}

Eigen::VectorXd oracle_center(const Dataset& ds, const FeatureTable& f, const Policy& pi, int h,
                              const Eigen::MatrixXd& q_next, const CriticSpec& spec, double lambda) {
    const double budget = ds.horizon() - h;
    RegressionProblem p = srle_dataset_for_policy(ds, f, h, &pi, q_next, TargetMode::policy);
    p.s = spec.s;
    p.B = budget;
    p.sigma = budget;
    p.epsilon = spec.epsilon;
    p.lambda = lambda;
    p.delta = spec.delta;
    const Eigen::VectorXd* warm = h < static_cast<int>(spec.warm_start.size()) ? &spec.warm_start[h] : nullptr;
    return run_oracle(spec.oracle, p, warm).w_hat;
}

double initial_value(const FeatureTable& f, const Policy& pi, int x1, const Eigen::MatrixXd& q0) {
    return pi.action_probs(f, 0).row(x1).dot(q0.row(x1));
}

int dataset_x1(const Dataset& ds) { return ds.trajectories.at(0).steps.at(0).x; }

}  // namespace

double pessopt_objective(const Dataset& ds, const FeatureTable& f, const Policy& pi, const Eigen::VectorXd& w1) {
    return initial_value(f, pi, dataset_x1(ds), f.linear(w1));
}

CriticOutput critic_uniform(const Dataset& ds, const FeatureTable& f, const Policy& pi, const CriticSpec& spec) {
    if (spec.variant != CriticVariant::uniform_coverage) throw ConfigError("critic_uniform: wrong critic variant");
    if (ds.size() < 1) throw std::invalid_argument("critic_uniform: empty dataset");
    const int H = ds.horizon();
    const Resolved res = resolve(ds, f, spec);
    CriticOutput out;
    out.weights.resize(H);
    out.centers.resize(H);
    out.q.resize(H);
    out.sigma_hat.resize(H);
    out.slack.resize(H);
    out.alpha = res.alpha;
    Eigen::MatrixXd q_next = Eigen::MatrixXd::Zero(f.num_states, f.num_actions);
    for (int h = H - 1; h >= 0; --h) {
        const double budget = H - h;
        out.centers[h] = oracle_center(ds, f, pi, h, q_next, spec, res.lambda);
        out.weights[h] = scale_into_l1_ball(out.centers[h], budget);
        out.sigma_hat[h] = empirical_covariance(ds, f, h, res.lambda, spec.epsilon);
        out.slack[h] = out.weights[h].lpNorm<1>() - budget;
        out.q[h] = f.linear(out.weights[h]).cwiseMax(-budget).cwiseMin(budget);
        q_next = out.q[h];
    }
    out.pessimistic_value = initial_value(f, pi, dataset_x1(ds), out.q[0]);
    out.passes = 1;
    return out;
}

// ---------------------------------------------------------------- pess_opt

namespace {

struct SupportSolution {
    bool feasible = false;
    Eigen::VectorXd w;
    double objective = 0.0;
};

// min g^T w over {||w - c||_Sigma <= alpha} n {||w||_1 <= budget} with supp(w) in S.
SupportSolution solve_on_support(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& sigma_c, double c_sigma_c,
                                 const Eigen::VectorXd& g, double alpha, double budget, const std::vector<int>& S) {
    const int k = static_cast<int>(S.size());
    Eigen::MatrixXd sig(k, k);
    Eigen::VectorXd sc(k), gs(k);
    for (int a = 0; a < k; ++a) {
        sc(a) = sigma_c(S[a]);
        gs(a) = g(S[a]);
        for (int b = 0; b < k; ++b) sig(a, b) = sigma(S[a], S[b]);
    }
    SupportSolution sol;
    Eigen::LLT<Eigen::MatrixXd> llt(sig);
    if (llt.info() != Eigen::Success) return sol;

    const double tol = 1e-12 * (1.0 + c_sigma_c + alpha * alpha);
    const Eigen::VectorXd u0 = llt.solve(sc);
    const double r0 = c_sigma_c - sc.dot(u0);
    double beta2 = alpha * alpha - r0;
    if (beta2 < -tol) return sol;
    beta2 = std::max(beta2, 0.0);

    // q(u) = ||E_S u - c||^2_Sigma
    auto q = [&](const Eigen::VectorXd& u) { return u.dot(sig * u) - 2.0 * u.dot(sc) + c_sigma_c; };
    auto inside = [&](const Eigen::VectorXd& u) { return q(u) <= alpha * alpha + tol; };
    auto l1 = [](const Eigen::VectorXd& u) { return u.lpNorm<1>(); };

    Eigen::VectorXd ustar = u0;
    const Eigen::VectorXd v = llt.solve(gs);
    const double den = gs.dot(v);
    if (den > 0.0) ustar = u0 - std::sqrt(beta2) * (1.0 - 1e-12) * v / std::sqrt(den);

    Eigen::VectorXd u;
    if (l1(ustar) <= budget) {
        u = ustar;
    } else if (Eigen::VectorXd scaled = ustar * (budget / l1(ustar)); inside(scaled)) {
        u = scaled;
    } else if (l1(u0) <= budget) {
        // Largest step from u0 towards ustar that stays in the l1 ball.
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (l1(u0 + mid * (ustar - u0)) <= budget) lo = mid;
            else hi = mid;
        }
        u = u0 + lo * (ustar - u0);
    } else if (Eigen::VectorXd scaled0 = u0 * (budget / l1(u0)); inside(scaled0)) {
        u = scaled0;
    } else {
        return sol;
    }
    sol.feasible = true;
    sol.w = Eigen::VectorXd::Zero(sigma.rows());
    for (int a = 0; a < k; ++a) sol.w(S[a]) = u(a);
    sol.objective = g.dot(sol.w);
    return sol;
}

double constraint_slack(const Eigen::VectorXd& w, const Eigen::VectorXd& c, const Eigen::MatrixXd& sigma, double alpha,
                        double budget, int s) {
    const Eigen::VectorXd diff = w - c;
    double slack = std::max(diff.dot(sigma * diff) - alpha * alpha, w.lpNorm<1>() - budget);
    if (static_cast<int>(nonzero_support(w).size()) > s) slack = std::numeric_limits<double>::infinity();
    return slack;
}

Eigen::VectorXd pessimistic_step(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& c, const Eigen::VectorXd& g,
                                 double alpha, double budget, int s) {
    const int d = static_cast<int>(c.size());
    const int k = std::min(s, d);
    if (!binomial_at_most(d, k, 1e6)) throw SearchSpaceTooLarge("critic_pessopt: C(d, s) exceeds 1e6");
    const Eigen::VectorXd sigma_c = sigma * c;
    const double c_sigma_c = c.dot(sigma_c);
    SupportSolution best;
    // Smaller supports first: they contain the l1 vertices that scaling on a
    // full-size support cannot reach.
    for (int size = 1; size <= k; ++size) {
        std::vector<int> S = first_combination(size);
        do {
            SupportSolution sol = solve_on_support(sigma, sigma_c, c_sigma_c, g, alpha, budget, S);
            if (sol.feasible && (!best.feasible || sol.objective < best.objective)) best = std::move(sol);
        } while (next_combination(S, d));
    }
    if (!best.feasible) throw Infeasible("critic_pessopt: no s-sparse point within alpha of the oracle fit");
    return best.w;
}

CriticOutput pessopt_alternating(const Dataset& ds, const FeatureTable& f, const Policy& pi, const CriticSpec& spec,
                                 const Resolved& res) {
    const int H = ds.horizon();
    CriticOutput out;
    out.weights.assign(H, Eigen::VectorXd::Zero(f.dim()));
    out.centers.resize(H);
    out.q.resize(H);
    out.sigma_hat.resize(H);
    out.slack.resize(H);
    out.alpha = res.alpha;
    std::vector<Eigen::VectorXd> g(H);
    for (int h = 0; h < H; ++h) {
        out.sigma_hat[h] = empirical_covariance(ds, f, h, res.lambda, spec.epsilon);
        g[h] = empirical_policy_features(ds, f, h, pi);
    }
    const int passes = std::max(1, spec.max_iters);
    for (int pass = 0; pass < passes; ++pass) {
        std::vector<Eigen::VectorXd> prev = out.weights;
        Eigen::MatrixXd q_next = Eigen::MatrixXd::Zero(f.num_states, f.num_actions);
        for (int h = H - 1; h >= 0; --h) {
            const double budget = H - h;
            out.centers[h] = oracle_center(ds, f, pi, h, q_next, spec, res.lambda);
            out.weights[h] = pessimistic_step(out.sigma_hat[h], out.centers[h], g[h], res.alpha[h], budget, spec.s);
            out.slack[h] = constraint_slack(out.weights[h], out.centers[h], out.sigma_hat[h], res.alpha[h], budget, spec.s);
            out.q[h] = f.linear(out.weights[h]);
            q_next = out.q[h];
        }
        out.passes = pass + 1;
        if (pass > 0 && prev == out.weights) break;
    }
    out.pessimistic_value = initial_value(f, pi, dataset_x1(ds), out.q[0]);
    return out;
}

// Feasible interval of v for w = v e_j: ||v e_j - c||^2_Sigma <= alpha^2, |v| <= budget.
bool coordinate_interval(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& c, int j, double alpha, double budget,
                         double& lo, double& hi) {
    const double a = sigma(j, j);
    const double b = (sigma * c)(j);
    const double cc = c.dot(sigma * c) - alpha * alpha;
    const double tol = 1e-12 * (1.0 + c.dot(sigma * c) + alpha * alpha);
    if (a <= 0.0) return false;
    double disc = b * b - a * cc;
    if (disc < -tol * a) return false;
    disc = std::max(disc, 0.0);
    const double root = std::sqrt(disc);
    lo = std::max((b - root) / a, -budget);
    hi = std::min((b + root) / a, budget);
    return lo <= hi;
}

struct TinySearch {
    const Dataset& ds;
    const FeatureTable& f;
    const Policy& pi;
    const CriticSpec& spec;
    const Resolved& res;
    std::vector<Eigen::MatrixXd> sigma;
    std::vector<Eigen::VectorXd> current;
    std::vector<Eigen::VectorXd> best_w;
    std::vector<Eigen::VectorXd> best_c;
    std::vector<Eigen::VectorXd> current_c;
    double best = std::numeric_limits<double>::infinity();
    int x1 = 0;

    void search(int h, const Eigen::MatrixXd& q_next) {
        const int d = f.dim();
        const double budget = ds.horizon() - h;
        const Eigen::VectorXd c = oracle_center(ds, f, pi, h, q_next, spec, res.lambda);
        current_c[h] = c;
        if (h == 0) {
            // Linear objective at x1 on each coordinate interval: take the better endpoint.
            const Eigen::VectorXd g0 = f.phi.transpose() * Eigen::VectorXd(pi_row_weights());
            for (int j = 0; j < d; ++j) {
                double lo, hi;
                if (!coordinate_interval(sigma[0], c, j, res.alpha[0], budget, lo, hi)) continue;
                const double v = g0(j) >= 0.0 ? lo : hi;
                const double obj = g0(j) * v;
                if (obj < best) {
                    best = obj;
                    current[0] = Eigen::VectorXd::Zero(d);
                    current[0](j) = v;
                    best_w = current;
                    best_c = current_c;
                }
            }
            return;
        }
        const int G = std::max(2, spec.grid_points);
        for (int j = 0; j < d; ++j) {
            double lo, hi;
            if (!coordinate_interval(sigma[h], c, j, res.alpha[h], budget, lo, hi)) continue;
            for (int i = 0; i < G; ++i) {
                const double v = lo + (hi - lo) * i / (G - 1);
                current[h] = Eigen::VectorXd::Zero(d);
                current[h](j) = v;
                search(h - 1, f.linear(current[h]));
            }
        }
    }

    // (X*A) weights putting pi_1(.|x1) on the rows of x1.
    Eigen::VectorXd pi_row_weights() const {
        Eigen::VectorXd wts = Eigen::VectorXd::Zero(f.rows());
        const Eigen::MatrixXd p0 = pi.action_probs(f, 0);
        for (int a = 0; a < f.num_actions; ++a) wts(f.row(x1, a)) = p0(x1, a);
        return wts;
    }
};

CriticOutput pessopt_exact_tiny(const Dataset& ds, const FeatureTable& f, const Policy& pi, const CriticSpec& spec,
                                const Resolved& res) {
    const int H = ds.horizon(), d = f.dim();
    if (spec.s != 1) throw ConfigError("exact_tiny solver requires s = 1");
    const double cells = std::pow(static_cast<double>(d) * std::max(2, spec.grid_points), H - 1);
    if (cells > 1e7) throw SearchSpaceTooLarge("exact_tiny: enumeration exceeds 1e7 cells");
    TinySearch ts{ds, f, pi, spec, res, {}, std::vector<Eigen::VectorXd>(H, Eigen::VectorXd::Zero(d)), {}, {},
                  std::vector<Eigen::VectorXd>(H), std::numeric_limits<double>::infinity(), dataset_x1(ds)};
    for (int h = 0; h < H; ++h) ts.sigma.push_back(empirical_covariance(ds, f, h, res.lambda, spec.epsilon));
    ts.search(H - 1, Eigen::MatrixXd::Zero(f.num_states, f.num_actions));
    if (!std::isfinite(ts.best)) throw Infeasible("exact_tiny: empty feasible set");

    CriticOutput out;
    out.weights = ts.best_w;
    out.centers = ts.best_c;
    out.sigma_hat = ts.sigma;
    out.alpha = res.alpha;
    out.q.resize(H);
    out.slack.resize(H);
    for (int h = 0; h < H; ++h) {
        out.q[h] = f.linear(out.weights[h]);
        out.slack[h] = constraint_slack(out.weights[h], out.centers[h], out.sigma_hat[h], res.alpha[h], H - h, spec.s);
    }
    out.pessimistic_value = initial_value(f, pi, ts.x1, out.q[0]);
    out.passes = 1;
    return out;
}

}  // namespace

CriticOutput critic_pessopt(const Dataset& ds, const FeatureTable& f, const Policy& pi, const CriticSpec& spec) {
    if (spec.variant != CriticVariant::pess_opt) throw ConfigError("critic_pessopt: wrong critic variant");
    if (ds.size() < 1) throw std::invalid_argument("critic_pessopt: empty dataset");
    const Resolved res = resolve(ds, f, spec);
    return spec.solver == CriticSolver::exact_tiny ? pessopt_exact_tiny(ds, f, pi, spec, res)
                                                   : pessopt_alternating(ds, f, pi, spec, res);
}

CriticOutput run_critic(const Dataset& ds, const FeatureTable& f, const Policy& pi, const CriticSpec& spec) {
    return spec.variant == CriticVariant::uniform_coverage ? critic_uniform(ds, f, pi, spec)
                                                           : critic_pessopt(ds, f, pi, spec);
}

// ---------------------------------------------------------------- actor

std::vector<Eigen::VectorXd> actor_step(const std::vector<Eigen::VectorXd>& upsilon, const std::vector<Eigen::VectorXd>& w,
                                        double eta) {
    if (eta < 0.0) throw std::invalid_argument("actor_step: eta must be >= 0");
    if (upsilon.size() != w.size()) throw std::invalid_argument("actor_step: horizon mismatch");
    std::vector<Eigen::VectorXd> out(upsilon.size());
    for (std::size_t h = 0; h < upsilon.size(); ++h) out[h] = upsilon[h] + eta * w[h];
    return out;
}

double default_eta(CriticVariant v, int num_actions, int H, int n) {
    const double la = std::log(static_cast<double>(num_actions));
    return v == CriticVariant::uniform_coverage ? std::sqrt(la / n) : std::sqrt(la / (static_cast<double>(H) * H * n));
}

ActorCriticResult run_actor_critic(const Dataset& ds, const FeatureTable& f, const ActorCriticOptions& opts,
                                   std::uint64_t seed) {
    (void)seed;
    if (opts.T < 1) throw std::invalid_argument("run_actor_critic: T must be >= 1");
    if (ds.size() < 1) throw std::invalid_argument("run_actor_critic: empty dataset");
    const int H = ds.horizon();
    const double eta = opts.eta >= 0.0 ? opts.eta : default_eta(opts.critic.variant, f.num_actions, H, ds.size());

    ActorCriticResult res;
    MixturePolicy mix;
    std::vector<Eigen::VectorXd> upsilon(H, Eigen::VectorXd::Zero(f.dim()));
    CriticSpec spec = opts.critic;
    for (int t = 1; t <= opts.T; ++t) {
        Policy pi(LogLinearPolicy{upsilon});
        CriticOutput c = run_critic(ds, f, pi, spec);
        spec.warm_start = c.centers;
        TraceRow row;
        row.t = t;
        row.pessimistic_value = c.pessimistic_value;
        row.max_slack = *std::max_element(c.slack.begin(), c.slack.end());
        row.subopt = opts.true_mdp ? suboptimality(*opts.true_mdp, pi) : std::numeric_limits<double>::quiet_NaN();
        res.trace.push_back(row);
        upsilon = actor_step(upsilon, c.weights, eta);
        mix.members.push_back(std::move(pi));
        if (opts.keep_critics) res.critics.push_back(std::move(c));
    }
    res.mixture = Policy(std::move(mix));
    return res;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream os;
    os.precision(17);
    os << "t,pessimistic_value,subopt_if_true_mdp_known,constraint_max_slack\n";
    for (const auto& r : trace) {
        os << r.t << ',' << r.pessimistic_value << ',';
        if (!std::isnan(r.subopt)) os << r.subopt;
        os << ',' << r.max_slack << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------- induced MDP

ValueTables evaluate_with_rewards(const SparseLinearMdp& m, const Policy& pi, const std::vector<Eigen::MatrixXd>& rewards) {
    const int H = m.horizon(), X = m.num_states(), A = m.num_actions();
    ValueTables vt;
    vt.Q.resize(H);
    vt.V.resize(H);
    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(X);
    for (int h = H - 1; h >= 0; --h) {
        Eigen::MatrixXd q = rewards.at(h);
        if (h + 1 < H) {
            const Eigen::VectorXd cont = m.P(h) * v_next;
            for (int x = 0; x < X; ++x)
                for (int a = 0; a < A; ++a) q(x, a) += cont(x * A + a);
        }
        vt.Q[h] = q;
        vt.V[h] = pi.action_probs(m.features(), h).cwiseProduct(q).rowwise().sum();
        v_next = vt.V[h];
    }
    return vt;
}

InducedMdpDiag induced_mdp_diagnostic(const SparseLinearMdp& m, const Policy& pi, const CriticOutput& critic) {
    const int H = m.horizon();
    InducedMdpDiag diag;
    diag.perturbed_reward.resize(H);
    for (int h = 0; h < H; ++h) {
        const Eigen::MatrixXd next =
            h + 1 < H ? critic.q[h + 1] : Eigen::MatrixXd::Zero(m.num_states(), m.num_actions());
        diag.perturbed_reward[h] = m.r(h) + critic.q[h] - bellman_apply(m, h, next, pi);
    }
    const ValueTables induced = evaluate_with_rewards(m, pi, diag.perturbed_reward);
    for (int h = 0; h < H; ++h)
        diag.value_match_error = std::max(diag.value_match_error, (induced.Q[h] - critic.q[h]).cwiseAbs().maxCoeff());
    diag.pessimistic_value = pi.action_probs(m.features(), 0).row(m.x1()).dot(critic.q[0].row(m.x1()));
    diag.true_value = policy_value(m, pi);
    return diag;
}

}  // namespace sorl
