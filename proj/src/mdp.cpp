#include "sorl/mdp.hpp"

#include "sorl/errors.hpp"
#include "sorl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sorl {

namespace {

// (X*A) vector -> X x A table.
Eigen::MatrixXd to_table(const Eigen::VectorXd& v, int X, int A) {
    Eigen::MatrixXd t(X, A);
    for (int x = 0; x < X; ++x)
        for (int a = 0; a < A; ++a) t(x, a) = v(x * A + a);
    return t;
}

}  // namespace

Eigen::MatrixXd FeatureTable::linear(const Eigen::VectorXd& w) const {
    return to_table(phi * w, num_states, num_actions);
}

SparseLinearMdp::SparseLinearMdp(FeatureTable features, std::vector<int> support, std::vector<Eigen::VectorXd> theta,
                                 std::vector<Eigen::MatrixXd> mu, int s, int x1)
    : features_(std::move(features)),
      support_(std::move(support)),
      theta_(std::move(theta)),
      mu_(std::move(mu)),
      s_(s),
      x1_(x1) {
    const int X = features_.num_states, A = features_.num_actions, d = features_.dim();
    if (X < 1 || A < 1) throw std::invalid_argument("mdp: empty state or action set");
    if (features_.phi.rows() != X * A) throw std::invalid_argument("mdp: feature table has wrong row count");
    if (theta_.empty() || theta_.size() != mu_.size()) throw std::invalid_argument("mdp: theta/mu horizon mismatch");
    if (x1_ < 0 || x1_ >= X) throw std::invalid_argument("mdp: x1 out of range");
    for (int i : support_)
        if (i < 0 || i >= d) throw std::invalid_argument("mdp: support index out of range");
    for (std::size_t h = 0; h < theta_.size(); ++h) {
        if (theta_[h].size() != d) throw std::invalid_argument("mdp: theta has wrong dimension");
        if (mu_[h].rows() != X || mu_[h].cols() != d) throw std::invalid_argument("mdp: mu has wrong shape");
        P_.push_back(features_.phi * mu_[h].transpose());
        r_.push_back(features_.linear(theta_[h]));
    }
}

Eigen::VectorXd SparseLinearMdp::transition_distribution(int h, int x, int a) const {
    if (x < 0 || x >= num_states() || a < 0 || a >= num_actions())
        throw std::out_of_range("transition_distribution: index out of range");
    return P_.at(h).row(features_.row(x, a)).transpose();
}

double SparseLinearMdp::mean_reward(int h, int x, int a) const {
    if (x < 0 || x >= num_states() || a < 0 || a >= num_actions())
        throw std::out_of_range("mean_reward: index out of range");
    return r_.at(h)(x, a);
}

bool SparseLinearMdp::operator==(const SparseLinearMdp& o) const {
    if (num_states() != o.num_states() || num_actions() != o.num_actions() || horizon() != o.horizon() ||
        dim() != o.dim() || s_ != o.s_ || x1_ != o.x1_ || support_ != o.support_)
        return false;
    if (features_.phi != o.features_.phi) return false;
    for (int h = 0; h < horizon(); ++h)
        if (theta_[h] != o.theta_[h] || mu_[h] != o.mu_[h]) return false;
    return true;
}

// ---------------------------------------------------------------- policies

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index x = 0; x < logits.rows(); ++x) {
        const double mx = logits.row(x).maxCoeff();
        p.row(x) = (logits.row(x).array() - mx).exp();
        p.row(x) /= p.row(x).sum();
    }
    return p;
}

Policy Policy::uniform(int num_states, int num_actions, int H) {
    TabularPolicy t;
    t.probs.assign(H, Eigen::MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions));
    return Policy(std::move(t));
}

Eigen::MatrixXd Policy::action_probs(const FeatureTable& f, int h) const {
    struct Visitor {
        const FeatureTable& f;
        int h;
        Eigen::MatrixXd operator()(const TabularPolicy& p) const { return p.probs.at(h); }
        Eigen::MatrixXd operator()(const LogLinearPolicy& p) const { return softmax_rows(f.linear(p.upsilon.at(h))); }
        Eigen::MatrixXd operator()(const GreedyPolicy& p) const {
            Eigen::MatrixXd q = f.linear(p.w.at(h)).cwiseMax(p.lo.at(h)).cwiseMin(p.hi.at(h));
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q.rows(), q.cols());
            for (Eigen::Index x = 0; x < q.rows(); ++x) {
                Eigen::Index best = 0;
                for (Eigen::Index a = 1; a < q.cols(); ++a)
                    if (q(x, a) > q(x, best)) best = a;
                out(x, best) = 1.0;
            }
            return out;
        }
        Eigen::MatrixXd operator()(const MixturePolicy&) const {
            throw std::logic_error("mixture policies have no per-step action table");
        }
    };
    return std::visit(Visitor{f, h}, v_);
}

std::vector<const Policy*> Policy::leaves() const {
    std::vector<const Policy*> out;
    if (const auto* m = std::get_if<MixturePolicy>(&v_)) {
        for (const auto& p : m->members) {
            auto sub = p.leaves();
            out.insert(out.end(), sub.begin(), sub.end());
        }
    } else {
        out.push_back(this);
    }
    return out;
}

std::string Policy::kind() const {
    switch (v_.index()) {
        case 0: return "tabular";
        case 1: return "log_linear";
        case 2: return "greedy";
        default: return "mixture";
    }
}

// ---------------------------------------------------------------- exact DP

namespace {

Eigen::VectorXd continuation(const SparseLinearMdp& m, int h, const Eigen::VectorXd& v_next) {
    if (h == m.horizon() - 1) return Eigen::VectorXd::Zero(m.num_states() * m.num_actions());
    return m.P(h) * v_next;
}

ValueTables evaluate_leaf(const SparseLinearMdp& m, const Policy& pi) {
    const int H = m.horizon(), X = m.num_states(), A = m.num_actions();
    ValueTables vt;
    vt.Q.resize(H);
    vt.V.resize(H);
    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(X);
    for (int h = H - 1; h >= 0; --h) {
        vt.Q[h] = m.r(h) + to_table(continuation(m, h, v_next), X, A);
        vt.V[h] = pi.action_probs(m.features(), h).cwiseProduct(vt.Q[h]).rowwise().sum();
        v_next = vt.V[h];
    }
    return vt;
}

}  // namespace

Eigen::MatrixXd bellman_apply(const SparseLinearMdp& m, int h, const Eigen::MatrixXd& f, const Policy& pi) {
    const int X = m.num_states(), A = m.num_actions();
    if (h == m.horizon() - 1) return m.r(h);
    Eigen::VectorXd v = pi.action_probs(m.features(), h + 1).cwiseProduct(f).rowwise().sum();
    return m.r(h) + to_table(m.P(h) * v, X, A);
}

Eigen::MatrixXd bellman_apply_greedy(const SparseLinearMdp& m, int h, const Eigen::MatrixXd& f) {
    const int X = m.num_states(), A = m.num_actions();
    if (h == m.horizon() - 1) return m.r(h);
    Eigen::VectorXd v = f.rowwise().maxCoeff();
    return m.r(h) + to_table(m.P(h) * v, X, A);
}

ValueTables exact_values(const SparseLinearMdp& m, const Policy& pi) {
    auto leaves = pi.leaves();
    if (leaves.empty()) throw std::invalid_argument("exact_values: empty mixture");
    ValueTables acc = evaluate_leaf(m, *leaves[0]);
    for (std::size_t i = 1; i < leaves.size(); ++i) {
        ValueTables v = evaluate_leaf(m, *leaves[i]);
        for (int h = 0; h < m.horizon(); ++h) {
            acc.Q[h] += v.Q[h];
            acc.V[h] += v.V[h];
        }
    }
    if (leaves.size() > 1) {
        const double k = static_cast<double>(leaves.size());
        for (int h = 0; h < m.horizon(); ++h) {
            acc.Q[h] /= k;
            acc.V[h] /= k;
        }
    }
    return acc;
}

OptimalSolution exact_optimal(const SparseLinearMdp& m) {
    const int H = m.horizon(), X = m.num_states(), A = m.num_actions();
    OptimalSolution sol;
    sol.values.Q.resize(H);
    sol.values.V.resize(H);
    sol.policy.probs.resize(H);
    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(X);
    for (int h = H - 1; h >= 0; --h) {
        Eigen::MatrixXd q = m.r(h) + to_table(continuation(m, h, v_next), X, A);
        Eigen::VectorXd v(X);
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(X, A);
        for (int x = 0; x < X; ++x) {
            int best = 0;
            for (int a = 1; a < A; ++a)
                if (q(x, a) > q(x, best)) best = a;
            v(x) = q(x, best);
            p(x, best) = 1.0;
        }
        sol.values.Q[h] = std::move(q);
        sol.values.V[h] = v;
        sol.policy.probs[h] = std::move(p);
        v_next = v;
    }
    return sol;
}

double policy_value(const SparseLinearMdp& m, const Policy& pi) { return exact_values(m, pi).V[0](m.x1()); }

double suboptimality(const SparseLinearMdp& m, const Policy& pi) {
    return exact_optimal(m).values.V[0](m.x1()) - policy_value(m, pi);
}

std::vector<Eigen::MatrixXd> occupancy_measures(const SparseLinearMdp& m, const Policy& pi) {
    const int H = m.horizon(), X = m.num_states(), A = m.num_actions();
    auto leaves = pi.leaves();
    if (leaves.empty()) throw std::invalid_argument("occupancy_measures: empty mixture");
    std::vector<Eigen::MatrixXd> acc(H, Eigen::MatrixXd::Zero(X, A));
    for (const Policy* leaf : leaves) {
        Eigen::VectorXd state = Eigen::VectorXd::Zero(X);
        state(m.x1()) = 1.0;
        for (int h = 0; h < H; ++h) {
            Eigen::MatrixXd occ = leaf->action_probs(m.features(), h).array().colwise() * state.array();
            acc[h] += occ;
            if (h + 1 < H) {
                Eigen::VectorXd flat(X * A);
                for (int x = 0; x < X; ++x)
                    for (int a = 0; a < A; ++a) flat(x * A + a) = occ(x, a);
                state = m.P(h).transpose() * flat;
            }
        }
    }
    for (auto& o : acc) o /= static_cast<double>(leaves.size());
    return acc;
}

Eigen::MatrixXd population_covariance(const FeatureTable& f, const Eigen::MatrixXd& nu) {
    const int d = f.dim();
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    for (int x = 0; x < f.num_states; ++x)
        for (int a = 0; a < f.num_actions; ++a) {
            const double w = nu(x, a);
            if (w == 0.0) continue;
            const auto row = f.phi.row(f.row(x, a));
            sigma.noalias() += w * row.transpose() * row;
        }
    return 0.5 * (sigma + sigma.transpose());
}

Eigen::VectorXd projection_weight(const SparseLinearMdp& m, int h, const Eigen::VectorXd& v_next) {
    if (h == m.horizon() - 1) return m.theta(h);
    return m.theta(h) + m.mu(h).transpose() * v_next;
}

double mu_operator_norm(const SparseLinearMdp& m, int h) {
    const auto& S = m.support();
    const Eigen::MatrixXd& mu = m.mu(h);
    const int k = static_cast<int>(S.size());
    if (k == 0) return 0.0;
    if (k > 20) {
        // Upper bound: sum_x' ||mu(x')||_1.
        return mu.cwiseAbs().sum();
    }
    Eigen::MatrixXd muS(mu.rows(), k);
    for (int j = 0; j < k; ++j) muS.col(j) = mu.col(S[j]);
    double best = 0.0;
    // sigma_0 = +1 by symmetry.
    const std::uint64_t patterns = std::uint64_t{1} << (k - 1);
    Eigen::VectorXd sigma(k);
    for (std::uint64_t bits = 0; bits < patterns; ++bits) {
        sigma(0) = 1.0;
        for (int j = 1; j < k; ++j) sigma(j) = ((bits >> (j - 1)) & 1) ? -1.0 : 1.0;
        best = std::max(best, (muS * sigma).cwiseAbs().sum());
    }
    return best;
}

std::vector<std::string> check_invariants(const SparseLinearMdp& m, double tol) {
    std::vector<std::string> bad;
    auto fail = [&](const std::string& msg) { bad.push_back(msg); };
    const int d = m.dim(), H = m.horizon(), X = m.num_states(), A = m.num_actions();
    const auto& S = m.support();
    std::vector<char> in_s(d, 0);
    for (int i : S) in_s[i] = 1;
    if (static_cast<int>(S.size()) != m.sparsity() || m.sparsity() > d) fail("support size differs from s or exceeds d");
    if (!std::is_sorted(S.begin(), S.end()) || std::adjacent_find(S.begin(), S.end()) != S.end())
        fail("support is not sorted and unique");
    if (m.features().phi.cwiseAbs().maxCoeff() > 1.0 + tol) fail("feature entry exceeds 1 in absolute value");
    for (int h = 0; h < H; ++h) {
        std::ostringstream at;
        at << " at h=" << h;
        if (m.theta(h).lpNorm<1>() > 1.0 + tol) fail("||theta||_1 > 1" + at.str());
        for (int i = 0; i < d; ++i) {
            if (in_s[i]) continue;
            if (m.theta(h)(i) != 0.0) fail("theta nonzero off support" + at.str());
            if (m.mu(h).col(i).cwiseAbs().maxCoeff() != 0.0) fail("mu nonzero off support" + at.str());
        }
        if (mu_operator_norm(m, h) > 1.0 + tol) fail("mu operator norm exceeds 1" + at.str());
        const Eigen::MatrixXd& P = m.P(h);
        if (P.minCoeff() < -1e-14) fail("negative transition probability" + at.str());
        for (int row = 0; row < X * A; ++row)
            if (std::abs(P.row(row).sum() - 1.0) > tol) {
                fail("transition row does not sum to 1" + at.str());
                break;
            }
        if (m.r(h).minCoeff() < -tol || m.r(h).maxCoeff() > 1.0 + tol) fail("mean reward outside [0,1]" + at.str());
    }
    return bad;
}

// ---------------------------------------------------------------- generators

namespace {

SparseLinearMdp build_attempt(const MdpConfig& cfg, std::uint64_t seed) {
    const int X = cfg.num_states, A = cfg.num_actions, H = cfg.H, d = cfg.d, s = cfg.s;
    const int rows = X * A;
    const double rho = 0.9;

    CounterRng sup_rng = make_stream(seed, "mdp/support");
    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < s; ++i) std::swap(perm[i], perm[i + sup_rng.below(d - i)]);
    std::vector<int> support(perm.begin(), perm.begin() + s);
    std::sort(support.begin(), support.end());
    const int anchor = support[0];

    FeatureTable f;
    f.num_states = X;
    f.num_actions = A;
    f.phi = Eigen::MatrixXd::Zero(rows, d);
    // On-support values: one stream per table row, independent of d.
    for (int row = 0; row < rows; ++row) {
        CounterRng g = make_stream(seed, "mdp/phi_support", row);
        f.phi(row, anchor) = 1.0;
        if (s < 2) continue;
        if (cfg.feature_family == FeatureFamily::signed_binary) {
            for (int k = 1; k < s; ++k) f.phi(row, support[k]) = g.sign();
        } else {
            const int dominant = 1 + static_cast<int>(g.below(s - 1));
            for (int k = 1; k < s; ++k) f.phi(row, support[k]) = (k == dominant) ? 1.0 : g.uniform(0.0, 0.2);
        }
    }
    // Off-support columns: stream indexed by rank among off-support columns.
    std::vector<int> off;
    for (int j = 0, k = 0; j < d; ++j) {
        if (k < s && support[k] == j) {
            ++k;
            continue;
        }
        off.push_back(j);
    }
    for (std::size_t r = 0; r < off.size(); ++r) {
        const std::uint64_t idx = cfg.coverage_mode == CoverageMode::narrow ? r % 2 : r;
        CounterRng g = make_stream(seed, cfg.coverage_mode == CoverageMode::narrow ? "mdp/latent" : "mdp/ambient", idx);
        for (int row = 0; row < rows; ++row)
            f.phi(row, off[r]) = cfg.feature_family == FeatureFamily::signed_binary ? g.sign() : g.uniform();
    }

    std::vector<Eigen::VectorXd> theta(H, Eigen::VectorXd::Zero(d));
    std::vector<Eigen::MatrixXd> mu(H, Eigen::MatrixXd::Zero(X, d));
    for (int h = 0; h < H; ++h) {
        CounterRng g = make_stream(seed, "mdp/kernel", h);
        Eigen::VectorXd p0(X);
        for (int x = 0; x < X; ++x) {
            double u;
            do {
                u = g.uniform();
            } while (u <= 0.0);
            p0(x) = -std::log(u);
        }
        p0 /= p0.sum();
        mu[h].col(anchor) = p0;
        if (s >= 2) {
            Eigen::MatrixXd c(X, s - 1);
            for (int k = 0; k < s - 1; ++k) {
                Eigen::VectorXd u(X);
                for (int x = 0; x < X; ++x) u(x) = g.uniform(-1.0, 1.0);
                const double mean = p0.dot(u);
                c.col(k) = p0.cwiseProduct(u.array().matrix() - Eigen::VectorXd::Constant(X, mean));
            }
            double worst = 0.0;
            for (int x = 0; x < X; ++x) worst = std::max(worst, c.row(x).cwiseAbs().sum() / p0(x));
            if (worst > 0.0) c *= rho / worst;
            for (int k = 1; k < s; ++k) mu[h].col(support[k]) = c.col(k - 1);
        }

        CounterRng t = make_stream(seed, "mdp/theta", h);
        theta[h](anchor) = 0.5;
        if (s >= 2) {
            Eigen::VectorXd mag(s - 1);
            for (int k = 0; k < s - 1; ++k) mag(k) = t.uniform(0.2, 1.0);
            mag *= 0.45 / mag.sum();
            for (int k = 1; k < s; ++k) theta[h](support[k]) = t.sign() * mag(k - 1);
        }
    }
    return SparseLinearMdp(std::move(f), std::move(support), std::move(theta), std::move(mu), s, 0);
}

}  // namespace

SparseLinearMdp build_random_sparse_mdp(const MdpConfig& cfg, std::uint64_t seed) {
    if (cfg.s < 1 || cfg.s > cfg.d) throw std::invalid_argument("build_random_sparse_mdp: need 1 <= s <= d");
    if (cfg.num_states < 2) throw std::invalid_argument("build_random_sparse_mdp: need num_states >= 2");
    if (cfg.num_actions < 1 || cfg.H < 1) throw std::invalid_argument("build_random_sparse_mdp: need A >= 1, H >= 1");
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const std::uint64_t key = attempt == 0 ? seed : derive_seed(seed, "mdp/retry", attempt);
        SparseLinearMdp m = build_attempt(cfg, key);
        if (check_invariants(m).empty()) return m;
    }
    throw ConstructionFailed("build_random_sparse_mdp: no valid kernel after 1000 attempts");
}

TabularPolicy behavior_policy(const SparseLinearMdp& m, double pi_star_weight) {
    const int X = m.num_states(), A = m.num_actions(), H = m.horizon();
    if (pi_star_weight < 0.0 || pi_star_weight > 1.0) throw std::invalid_argument("behavior_policy: weight outside [0,1]");
    TabularPolicy out;
    out.probs.assign(H, Eigen::MatrixXd::Constant(X, A, 1.0 / A));
    if (pi_star_weight == 0.0) return out;
    const TabularPolicy star = exact_optimal(m).policy;
    for (int h = 0; h < H; ++h) out.probs[h] = (1.0 - pi_star_weight) * out.probs[h] + pi_star_weight * star.probs[h];
    return out;
}

FeatureFamily parse_feature_family(const std::string& s) {
    if (s == "signed_binary") return FeatureFamily::signed_binary;
    if (s == "anchored_simplex") return FeatureFamily::anchored_simplex;
    throw ConfigError("unknown feature_family: " + s);
}

CoverageMode parse_coverage_mode(const std::string& s) {
    if (s == "uniform") return CoverageMode::uniform;
    if (s == "narrow") return CoverageMode::narrow;
    throw ConfigError("unknown coverage_mode: " + s);
}

std::string to_string(FeatureFamily f) { return f == FeatureFamily::signed_binary ? "signed_binary" : "anchored_simplex"; }
std::string to_string(CoverageMode c) { return c == CoverageMode::uniform ? "uniform" : "narrow"; }

}  // namespace sorl
