#include "test_support.hpp"

#include "sorl/errors.hpp"
#include "sorl/io.hpp"
#include "sorl/mdp.hpp"
#include "sorl/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace sorl;
using sorl::testing::forward_value;
using sorl::testing::make_mdp;
using sorl::testing::random_tabular;

namespace {

MdpConfig small_cfg(int X, int A, int H, int d, int s) {
    MdpConfig c;
    c.num_states = X;
    c.num_actions = A;
    c.H = H;
    c.d = d;
    c.s = s;
    return c;
}

// All deterministic Markov policies on X states, A actions, H steps, one at a time.
template <class F>
void for_each_deterministic(int X, int A, int H, F&& visit) {
    const int cells = X * H;
    std::vector<int> choice(cells, 0);
    while (true) {
        TabularPolicy p;
        for (int h = 0; h < H; ++h) {
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(X, A);
            for (int x = 0; x < X; ++x) t(x, choice[h * X + x]) = 1.0;
            p.probs.push_back(t);
        }
        visit(Policy(p));
        int i = 0;
        while (i < cells && ++choice[i] == A) choice[i++] = 0;
        if (i == cells) break;
    }
}

}  // namespace

TEST_CASE("generated MDPs satisfy every invariant") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = build_random_sparse_mdp(small_cfg(2, 1, 1, 2, 1), seed);
        CHECK(check_invariants(m).empty());
    }
    for (auto family : {FeatureFamily::signed_binary, FeatureFamily::anchored_simplex})
        for (auto cov : {CoverageMode::uniform, CoverageMode::narrow})
            for (std::uint64_t seed = 0; seed < 10; ++seed) {
                MdpConfig c = small_cfg(7, 3, 4, 12, 3);
                c.feature_family = family;
                c.coverage_mode = cov;
                const auto m = build_random_sparse_mdp(c, seed);
                const auto v = check_invariants(m);
                CHECK_MESSAGE(v.empty(), (v.empty() ? "" : v.front()));
            }
}

TEST_CASE("generator accepts the dense and bandit corner cases") {
    CHECK(check_invariants(build_random_sparse_mdp(small_cfg(4, 2, 3, 5, 5), 3)).empty());
    CHECK(check_invariants(build_random_sparse_mdp(small_cfg(4, 2, 1, 5, 2), 3)).empty());
}

TEST_CASE("generator rejects invalid configurations") {
    CHECK_THROWS_AS(build_random_sparse_mdp(small_cfg(4, 2, 3, 3, 4), 1), std::invalid_argument);
    CHECK_THROWS_AS(build_random_sparse_mdp(small_cfg(1, 2, 3, 3, 1), 1), std::invalid_argument);
}

TEST_CASE("anchored_simplex transition rows sum to one by direct summation") {
    MdpConfig c = small_cfg(6, 3, 3, 10, 2);
    c.feature_family = FeatureFamily::anchored_simplex;
    const auto m = build_random_sparse_mdp(c, 7);
    const FeatureTable& f = m.features();
    for (int h = 0; h < m.horizon(); ++h)
        for (int x = 0; x < m.num_states(); ++x)
            for (int a = 0; a < m.num_actions(); ++a) {
                double total = 0.0;
                for (int xn = 0; xn < m.num_states(); ++xn) {
                    double p = 0.0;
                    for (int i = 0; i < m.dim(); ++i) p += f.phi(f.row(x, a), i) * m.mu(h)(xn, i);
                    CHECK(p >= -1e-14);
                    total += p;
                }
                CHECK(std::abs(total - 1.0) <= 1e-12);
            }
}

TEST_CASE("construction is deterministic in the seed") {
    const MdpConfig c = small_cfg(6, 3, 3, 12, 2);
    CHECK(build_random_sparse_mdp(c, 11) == build_random_sparse_mdp(c, 11));
    CHECK_FALSE(build_random_sparse_mdp(c, 11) == build_random_sparse_mdp(c, 12));
    CHECK(to_json(build_random_sparse_mdp(c, 11)).dump() == to_json(build_random_sparse_mdp(c, 11)).dump());
}

TEST_CASE("transition_distribution identity and uniform kernels") {
    Eigen::MatrixXd phi(2, 2);
    phi << 1, 0, 1, 0;
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(2, 2);
    mu(1, 0) = 1.0;
    const auto m = make_mdp(phi, 2, 1, {Eigen::VectorXd::Zero(2)}, {mu}, {0});
    CHECK(m.transition_distribution(0, 0, 0).isApprox(Eigen::Vector2d(0, 1)));

    const int X = 5;
    Eigen::MatrixXd phi_u = Eigen::MatrixXd::Zero(X, 3);
    phi_u.col(0).setOnes();
    phi_u.col(2).setConstant(-0.5);
    Eigen::MatrixXd mu_u = Eigen::MatrixXd::Zero(X, 3);
    mu_u.col(0).setConstant(1.0 / X);
    const auto mu_m = make_mdp(phi_u, X, 1, {Eigen::VectorXd::Zero(3)}, {mu_u}, {0});
    for (int x = 0; x < X; ++x) {
        const Eigen::VectorXd p = mu_m.transition_distribution(0, x, 0);
        for (int xn = 0; xn < X; ++xn) CHECK(p(xn) == doctest::Approx(1.0 / X).epsilon(1e-15));
    }
}

TEST_CASE("transition_distribution and mean_reward match inner products") {
    const auto m = build_random_sparse_mdp(small_cfg(6, 3, 3, 12, 2), 7);
    for (int h = 0; h < m.horizon(); ++h)
        for (int x = 0; x < m.num_states(); ++x)
            for (int a = 0; a < m.num_actions(); ++a) {
                const Eigen::VectorXd phi = m.features().at(x, a);
                const Eigen::VectorXd p = m.transition_distribution(h, x, a);
                for (int xn = 0; xn < m.num_states(); ++xn)
                    CHECK(std::abs(p(xn) - phi.dot(m.mu(h).row(xn).transpose())) <= 1e-14);
                const double r = m.mean_reward(h, x, a);
                CHECK(std::abs(r - phi.dot(m.theta(h))) <= 1e-14);
                CHECK(r >= 0.0);
                CHECK(r <= 1.0);
            }
}

TEST_CASE("mean_reward corner cases") {
    Eigen::MatrixXd phi(1, 2);
    phi << 0.5, 0.0;
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(1, 2);
    mu(0, 0) = 2.0;  // only the kernel shape matters here
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(2);
    e1(0) = 1.0;
    CHECK(make_mdp(phi, 1, 1, {e1}, {mu}, {0}).mean_reward(0, 0, 0) == 0.5);
    CHECK(make_mdp(phi, 1, 1, {Eigen::VectorXd::Zero(2)}, {mu}, {0}).mean_reward(0, 0, 0) == 0.0);
}

TEST_CASE("bellman_apply matches brute-force double sums") {
    const auto m = build_random_sparse_mdp(small_cfg(5, 3, 3, 8, 2), 21);
    CounterRng rng(5);
    const Policy pi(random_tabular(m, rng));
    const FeatureTable& f = m.features();
    for (int h = 0; h < m.horizon(); ++h) {
        Eigen::MatrixXd g(m.num_states(), m.num_actions());
        for (int i = 0; i < g.size(); ++i) g(i) = rng.uniform(-2, 2);

        CHECK((bellman_apply(m, h, Eigen::MatrixXd::Zero(g.rows(), g.cols()), pi) - m.r(h)).cwiseAbs().maxCoeff() <= 1e-14);

        const Eigen::MatrixXd bp = bellman_apply(m, h, g, pi);
        const Eigen::MatrixXd bg = bellman_apply_greedy(m, h, g);
        const bool last = h == m.horizon() - 1;
        const Eigen::MatrixXd probs = last ? Eigen::MatrixXd() : pi.action_probs(f, h + 1);
        for (int x = 0; x < m.num_states(); ++x)
            for (int a = 0; a < m.num_actions(); ++a) {
                double ep = m.mean_reward(h, x, a), eg = ep;
                if (!last) {
                    for (int xn = 0; xn < m.num_states(); ++xn) {
                        double p = 0.0;
                        for (int i = 0; i < m.dim(); ++i) p += f.phi(f.row(x, a), i) * m.mu(h)(xn, i);
                        double avg = 0.0, best = g(xn, 0);
                        for (int an = 0; an < m.num_actions(); ++an) {
                            avg += probs(xn, an) * g(xn, an);
                            best = std::max(best, g(xn, an));
                        }
                        ep += p * avg;
                        eg += p * best;
                    }
                }
                CHECK(std::abs(bp(x, a) - ep) <= 1e-12);
                CHECK(std::abs(bg(x, a) - eg) <= 1e-12);
            }
    }
}

TEST_CASE("exact values satisfy the Bellman equations") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = build_random_sparse_mdp(small_cfg(6, 3, 4, 10, 2), seed);
        CounterRng rng(seed);
        const Policy pi(random_tabular(m, rng));
        const ValueTables v = exact_values(m, pi);
        const OptimalSolution opt = exact_optimal(m);
        const int H = m.horizon();
        for (int h = 0; h < H; ++h) {
            const Eigen::MatrixXd next = h + 1 < H ? v.Q[h + 1] : Eigen::MatrixXd::Zero(6, 3);
            CHECK((v.Q[h] - bellman_apply(m, h, next, pi)).cwiseAbs().maxCoeff() <= 1e-10);
            const Eigen::MatrixXd onext = h + 1 < H ? opt.values.Q[h + 1] : Eigen::MatrixXd::Zero(6, 3);
            CHECK((opt.values.Q[h] - bellman_apply_greedy(m, h, onext)).cwiseAbs().maxCoeff() <= 1e-10);
            const Eigen::VectorXd vh = (pi.action_probs(m.features(), h).cwiseProduct(v.Q[h])).rowwise().sum();
            CHECK((vh - v.V[h]).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(v.V[h].minCoeff() >= -1e-12);
            CHECK(v.V[h].maxCoeff() <= H - h + 1e-12);
        }
    }
}

TEST_CASE("single-step values equal the rewards") {
    const auto m = build_random_sparse_mdp(small_cfg(4, 3, 1, 6, 2), 2);
    CHECK((exact_values(m, Policy::uniform(4, 3, 1)).Q[0] - m.r(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((exact_optimal(m).values.Q[0] - m.r(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("optimum matches exhaustive deterministic policy enumeration") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = build_random_sparse_mdp(small_cfg(4, 2, 3, 6, 2), 100 + seed);
        double best = -1.0;
        for_each_deterministic(4, 2, 3, [&](const Policy& p) { best = std::max(best, forward_value(m, p)); });
        const OptimalSolution opt = exact_optimal(m);
        CHECK(std::abs(opt.values.V[0](m.x1()) - best) <= 1e-12);
        CHECK(std::abs(forward_value(m, Policy(opt.policy)) - best) <= 1e-12);
    }
}

TEST_CASE("mixture value is the member average") {
    const auto m = build_random_sparse_mdp(small_cfg(5, 3, 3, 8, 2), 4);
    CounterRng rng(9);
    std::vector<Policy> members;
    double mean = 0.0;
    for (int i = 0; i < 4; ++i) {
        members.emplace_back(random_tabular(m, rng));
        mean += policy_value(m, members.back()) / 4.0;
    }
    const Policy mix(MixturePolicy{members});
    CHECK(std::abs(policy_value(m, mix) - mean) <= 1e-10);
    CHECK_THROWS_AS(mix.action_probs(m.features(), 0), std::logic_error);
}

TEST_CASE("suboptimality") {
    const auto m = build_random_sparse_mdp(small_cfg(6, 3, 3, 10, 2), 13);
    const OptimalSolution opt = exact_optimal(m);
    CHECK(std::abs(suboptimality(m, Policy(opt.policy))) <= 1e-12);
    const Policy u = Policy::uniform(6, 3, 3);
    CHECK(std::abs(suboptimality(m, u) - (opt.values.V[0](m.x1()) - forward_value(m, u))) <= 1e-12);

    CounterRng rng(3);
    const double vstar = opt.values.V[0](m.x1());
    for (int i = 0; i < 100; ++i) CHECK(vstar >= forward_value(m, Policy(random_tabular(m, rng))) - 1e-10);

    MdpConfig c = small_cfg(4, 2, 3, 5, 2);
    auto base = build_random_sparse_mdp(c, 5);
    std::vector<Eigen::VectorXd> zero(3, Eigen::VectorXd::Zero(5));
    std::vector<Eigen::MatrixXd> mus;
    for (int h = 0; h < 3; ++h) mus.push_back(base.mu(h));
    const SparseLinearMdp reward_free(base.features(), base.support(), zero, mus, 2, 0);
    CHECK(suboptimality(reward_free, Policy::uniform(4, 2, 3)) == 0.0);
    CHECK(suboptimality(reward_free, Policy(random_tabular(reward_free, rng))) == 0.0);
}

TEST_CASE("occupancy at the first step is pi(.|x1) at x1") {
    const auto m = build_random_sparse_mdp(small_cfg(5, 3, 3, 8, 2), 8);
    CounterRng rng(1);
    const Policy pi(random_tabular(m, rng));
    const auto occ = occupancy_measures(m, pi);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(5, 3);
    expect.row(m.x1()) = pi.action_probs(m.features(), 0).row(m.x1());
    CHECK((occ[0] - expect).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& o : occ) CHECK(std::abs(o.sum() - 1.0) <= 1e-12);
}

TEST_CASE("occupancy of a deterministic chain is a point mass per step") {
    const auto m = sorl::testing::chain_mdp(4, 2, 3);
    const auto occ = occupancy_measures(m, Policy::uniform(4, 2, 3));
    for (int h = 0; h < 3; ++h) {
        CHECK(occ[h].row(h).sum() == doctest::Approx(1.0));
        CHECK(std::abs(occ[h].sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("occupancy matches Monte-Carlo rollouts") {
    const auto m = build_random_sparse_mdp(small_cfg(5, 3, 3, 8, 2), 31);
    CounterRng prng(2);
    const Policy pi(random_tabular(m, prng));
    const auto occ = occupancy_measures(m, pi);
    const int n = 100000;
    std::vector<Eigen::MatrixXd> counts(3, Eigen::MatrixXd::Zero(5, 3));
    CounterRng rng(77);
    auto draw = [&](const Eigen::VectorXd& p) {
        double u = rng.uniform(), acc = 0.0;
        for (int i = 0; i < p.size(); ++i) {
            acc += p(i);
            if (u < acc) return i;
        }
        return static_cast<int>(p.size()) - 1;
    };
    std::vector<Eigen::MatrixXd> probs;
    for (int h = 0; h < 3; ++h) probs.push_back(pi.action_probs(m.features(), h));
    for (int k = 0; k < n; ++k) {
        int x = m.x1();
        for (int h = 0; h < 3; ++h) {
            const int a = draw(probs[h].row(x).transpose());
            counts[h](x, a) += 1.0;
            x = draw(m.transition_distribution(h, x, a));
        }
    }
    for (int h = 0; h < 3; ++h)
        for (int i = 0; i < occ[h].size(); ++i) {
            const double p = occ[h](i), freq = counts[h](i) / n;
            const double sd = std::sqrt(p * (1.0 - p) / n);
            CHECK(std::abs(freq - p) <= 3.0 * sd + 1e-12);
        }
}

TEST_CASE("population covariance") {
    const auto m = build_random_sparse_mdp(small_cfg(5, 3, 3, 8, 2), 6);
    const FeatureTable& f = m.features();
    Eigen::MatrixXd point = Eigen::MatrixXd::Zero(5, 3);
    point(2, 1) = 1.0;
    const Eigen::VectorXd phi = f.at(2, 1);
    CHECK((population_covariance(f, point) - phi * phi.transpose()).cwiseAbs().maxCoeff() <= 1e-15);

    CounterRng rng(4);
    Eigen::MatrixXd nu(5, 3);
    for (int i = 0; i < nu.size(); ++i) nu(i) = rng.uniform();
    nu /= nu.sum();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(8, 8);
    for (int x = 0; x < 5; ++x)
        for (int a = 0; a < 3; ++a)
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) acc(i, j) += nu(x, a) * f.phi(f.row(x, a), i) * f.phi(f.row(x, a), j);
    const Eigen::MatrixXd cov = population_covariance(f, nu);
    CHECK((cov - acc).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov).eigenvalues().minCoeff() >= -1e-12);

    // one-hot features under the uniform distribution
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Identity(4, 4);
    FeatureTable g{2, 2, onehot};
    const Eigen::MatrixXd uni = Eigen::MatrixXd::Constant(2, 2, 0.25);
    CHECK((population_covariance(g, uni) - 0.25 * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("projection weights of sparse-class members stay in budget and on the support") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = build_random_sparse_mdp(small_cfg(6, 3, 4, 12, 3), seed);
        const FeatureTable& f = m.features();
        const int H = m.horizon();
        CounterRng rng(seed + 1000);
        for (int h = 0; h + 1 < H; ++h)
            for (int trial = 0; trial < 20; ++trial) {
                // member of the class at h + 1: ||w||_1 <= H - h - 1, ||w||_0 <= s
                Eigen::VectorXd w = Eigen::VectorXd::Zero(m.dim());
                for (int k = 0; k < m.sparsity(); ++k) w(rng.below(m.dim())) = rng.uniform(-1, 1);
                if (w.lpNorm<1>() > 0.0) w *= (H - h - 1) * rng.uniform() / w.lpNorm<1>();
                const Policy pi(random_tabular(m, rng));
                const Eigen::VectorXd v = (pi.action_probs(f, h + 1).cwiseProduct(f.linear(w))).rowwise().sum();
                const Eigen::VectorXd proj = projection_weight(m, h, v);
                CHECK(proj.lpNorm<1>() <= H - h + 1e-10);
                for (int i = 0; i < m.dim(); ++i)
                    if (std::find(m.support().begin(), m.support().end(), i) == m.support().end()) CHECK(proj(i) == 0.0);
                // and it reproduces the Bellman backup exactly
                CHECK((f.linear(proj) - (m.r(h) + Eigen::Map<const Eigen::MatrixXd>(
                                                      Eigen::VectorXd(m.P(h) * v).data(), m.num_actions(), m.num_states())
                                                      .transpose()))
                          .cwiseAbs()
                          .maxCoeff() <= 1e-12);
            }
    }
}

TEST_CASE("kernel operator norm is at most one") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = build_random_sparse_mdp(small_cfg(6, 3, 3, 10, 3), seed);
        for (int h = 0; h < m.horizon(); ++h) CHECK(mu_operator_norm(m, h) <= 1.0 + 1e-12);
    }
}

TEST_CASE("softmax is invariant to per-state logit shifts") {
    CounterRng rng(8);
    Eigen::MatrixXd logits(6, 4);
    for (int i = 0; i < logits.size(); ++i) logits(i) = rng.uniform(-5, 5);
    Eigen::MatrixXd shifted = logits;
    for (int x = 0; x < 6; ++x) shifted.row(x).array() += rng.uniform(-50, 50);
    const Eigen::MatrixXd p = softmax_rows(logits);
    CHECK((p - softmax_rows(shifted)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("log-linear policies evaluate to softmax of feature logits") {
    const auto m = build_random_sparse_mdp(small_cfg(5, 3, 2, 8, 2), 1);
    CounterRng rng(6);
    std::vector<Eigen::VectorXd> ups(2, Eigen::VectorXd::Zero(8));
    for (auto& u : ups)
        for (int i = 0; i < 8; ++i) u(i) = rng.uniform(-1, 1);
    const Policy pi(LogLinearPolicy{ups});
    for (int h = 0; h < 2; ++h) {
        const Eigen::MatrixXd p = pi.action_probs(m.features(), h);
        for (int x = 0; x < 5; ++x) {
            double z = 0.0;
            for (int a = 0; a < 3; ++a) z += std::exp(m.features().at(x, a).dot(ups[h]));
            for (int a = 0; a < 3; ++a)
                CHECK(std::abs(p(x, a) - std::exp(m.features().at(x, a).dot(ups[h])) / z) <= 1e-12);
        }
    }
}

TEST_CASE("MDP and policy JSON round trips") {
    const auto m = build_random_sparse_mdp(small_cfg(5, 3, 3, 8, 2), 17);
    const auto back = mdp_from_json(json::parse(to_json(m).dump()));
    CHECK(back == m);
    CHECK(mdp_hash(back) == mdp_hash(m));

    CounterRng rng(1);
    const Policy tab(random_tabular(m, rng));
    const Policy mix(MixturePolicy{{tab, Policy(LogLinearPolicy{{Eigen::VectorXd::Ones(8), Eigen::VectorXd::Zero(8),
                                                                  Eigen::VectorXd::Zero(8)}})}});
    for (const Policy* p : {&tab, &mix}) {
        const Policy q = policy_from_json(json::parse(to_json(*p).dump()));
        CHECK(to_json(q).dump() == to_json(*p).dump());
        CHECK(policy_value(m, q) == policy_value(m, *p));
    }

    json bad = to_json(tab);
    bad["probs"][0][0][0] = 2.0;
    CHECK_THROWS(policy_from_json(bad));
}
