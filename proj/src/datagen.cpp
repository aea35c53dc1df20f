#include "sorl/datagen.hpp"

#include "sorl/errors.hpp"
#include "sorl/io.hpp"
#include "sorl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sorl {

int Dataset::num_corrupted() const {
    return static_cast<int>(std::count(corrupted.begin(), corrupted.end(), 1));
}

AttackKind parse_attack_kind(const std::string& s) {
    if (s == "reward_poison") return AttackKind::reward_poison;
    if (s == "feature_swap") return AttackKind::feature_swap;
    if (s == "value_flip") return AttackKind::value_flip;
    throw ConfigError("unknown attack kind: " + s);
}

TargetSelection parse_target_selection(const std::string& s) {
    if (s == "random") return TargetSelection::random;
    if (s == "high_reward_first") return TargetSelection::high_reward_first;
    throw ConfigError("unknown target_selection: " + s);
}

std::string to_string(AttackKind k) {
    switch (k) {
        case AttackKind::reward_poison: return "reward_poison";
        case AttackKind::feature_swap: return "feature_swap";
        default: return "value_flip";
    }
}

std::string to_string(TargetSelection t) {
    return t == TargetSelection::random ? "random" : "high_reward_first";
}

int corruption_budget(double epsilon, int n) {
    return static_cast<int>(std::ceil(epsilon * n - 1e-9));
}

namespace {

int sample_categorical(CounterRng& g, const Eigen::Ref<const Eigen::RowVectorXd>& p) {
    const double u = g.uniform();
    double acc = 0.0;
    int last = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) <= 0.0) continue;
        acc += p(i);
        last = static_cast<int>(i);
        if (u < acc) return last;
    }
    return last;  // rounding slack lands on the last positive entry
}

}  // namespace

Dataset generate_dataset(const SparseLinearMdp& m, const Policy& behavior, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_dataset: N must be >= 1");
    const int H = m.horizon();
    auto leaves = behavior.leaves();
    std::vector<std::vector<Eigen::MatrixXd>> tables(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i)
        for (int h = 0; h < H; ++h) tables[i].push_back(leaves[i]->action_probs(m.features(), h));

    Dataset ds;
    ds.trajectories.resize(n);
    ds.corrupted.assign(n, 0);
    ds.provenance = {mdp_hash(m), policy_hash(behavior), seed};
    for (int t = 0; t < n; ++t) {
        CounterRng g = make_stream(seed, "data/trajectory", t);
        const std::size_t member = leaves.size() == 1 ? 0 : g.below(leaves.size());
        Trajectory& tr = ds.trajectories[t];
        tr.steps.resize(H);
        int x = m.x1();
        for (int h = 0; h < H; ++h) {
            const int a = sample_categorical(g, tables[member][h].row(x));
            const double R = g.bernoulli(m.r(h)(x, a)) ? 1.0 : 0.0;
            tr.steps[h] = {x, a, R};
            if (h + 1 < H) x = sample_categorical(g, m.P(h).row(m.features().row(x, a)));
        }
    }
    return ds;
}

Dataset corrupt_dataset(const Dataset& ds, const FeatureTable& f, const AttackSpec& attack, double epsilon,
                        std::uint64_t seed) {
    if (!(epsilon >= 0.0 && epsilon < 0.5)) throw BadEpsilon("corrupt_dataset: epsilon must lie in [0, 1/2)");
    Dataset out = ds;
    out.epsilon = epsilon;
    const int n = ds.size(), H = ds.horizon();
    const int k = corruption_budget(epsilon, n);
    if (k == 0) return out;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (attack.target_selection == TargetSelection::random) {
        CounterRng g = make_stream(seed, "corrupt/select");
        for (int i = 0; i + 1 < n; ++i) std::swap(order[i], order[i + g.below(n - i)]);
    } else {
        std::vector<double> total(n, 0.0);
        for (int t = 0; t < n; ++t)
            for (const Step& st : ds.trajectories[t].steps) total[t] += st.R;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return total[a] > total[b]; });
    }
    std::vector<int> chosen(order.begin(), order.begin() + k);

    const double Hd = static_cast<double>(H);
    auto clip = [Hd](double v) { return std::clamp(v, -Hd, Hd); };

    // Per-step ridge fits on the input data, used by feature_swap.
    std::vector<Eigen::VectorXd> w_ridge;
    if (attack.kind == AttackKind::feature_swap) {
        for (int h = 0; h < H; ++h) {
            Eigen::MatrixXd Z(n, f.dim());
            Eigen::VectorXd y(n);
            for (int t = 0; t < n; ++t) {
                const Step& st = ds.trajectories[t].steps[h];
                Z.row(t) = f.phi.row(f.row(st.x, st.a));
                y(t) = st.R;
            }
            Eigen::MatrixXd G = Z.transpose() * Z;
            G.diagonal().array() += 1.0;
            w_ridge.push_back(G.ldlt().solve(Z.transpose() * y));
        }
    }

    for (int t : chosen) {
        Trajectory& tr = out.trajectories[t];
        for (int h = 0; h < H; ++h) {
            Step& st = tr.steps[h];
            switch (attack.kind) {
                case AttackKind::reward_poison: st.R = clip(-attack.magnitude * Hd); break;
                case AttackKind::value_flip: st.R = clip(attack.magnitude * Hd - st.R); break;
                case AttackKind::feature_swap: {
                    const Eigen::VectorXd pred = f.phi * w_ridge[h];
                    Eigen::Index best = 0;
                    double worst = -1.0;
                    for (Eigen::Index row = 0; row < pred.size(); ++row) {
                        const double gap = std::abs(pred(row) - st.R);
                        if (gap > worst) {
                            worst = gap;
                            best = row;
                        }
                    }
                    st.x = static_cast<int>(best) / f.num_actions;
                    st.a = static_cast<int>(best) % f.num_actions;
                    break;
                }
            }
        }
        out.corrupted[t] = 1;
    }
    return out;
}

Eigen::MatrixXd empirical_covariance(const Dataset& ds, const FeatureTable& f, int h, double lambda, double epsilon) {
    if (lambda < 0.0) throw std::invalid_argument("empirical_covariance: lambda must be >= 0");
    const int d = f.dim();
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    if (ds.size() > 0) {
        Eigen::MatrixXd Z(ds.size(), d);
        for (int t = 0; t < ds.size(); ++t) {
            const Step& st = ds.trajectories[t].steps.at(h);
            Z.row(t) = f.phi.row(f.row(st.x, st.a));
        }
        sigma = Z.transpose() * Z / static_cast<double>(ds.size());
        sigma = 0.5 * (sigma + sigma.transpose());
    }
    sigma.diagonal().array() += lambda + epsilon;
    return sigma;
}

RegressionProblem srle_dataset_for_policy(const Dataset& ds, const FeatureTable& f, int h, const Policy* pi,
                                          const Eigen::MatrixXd& q_next, TargetMode mode) {
    const int n = ds.size(), H = ds.horizon();
    RegressionProblem p;
    p.Z.resize(n, f.dim());
    p.y.resize(n);
    const bool last = h == H - 1;
    Eigen::VectorXd v_next;
    if (!last) {
        if (mode == TargetMode::greedy) {
            v_next = q_next.rowwise().maxCoeff();
        } else {
            if (pi == nullptr) throw std::invalid_argument("srle_dataset_for_policy: policy mode needs a policy");
            v_next = pi->action_probs(f, h + 1).cwiseProduct(q_next).rowwise().sum();
        }
    }
    for (int t = 0; t < n; ++t) {
        const auto& steps = ds.trajectories[t].steps;
        p.Z.row(t) = f.phi.row(f.row(steps[h].x, steps[h].a));
        p.y(t) = steps[h].R + (last ? 0.0 : v_next(steps[h + 1].x));
    }
    return p;
}

Eigen::VectorXd empirical_policy_features(const Dataset& ds, const FeatureTable& f, int h, const Policy& pi) {
    const Eigen::MatrixXd probs = pi.action_probs(f, h);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(f.dim());
    for (const auto& tr : ds.trajectories) {
        const int x = tr.steps[h].x;
        for (int a = 0; a < f.num_actions; ++a) g += probs(x, a) * f.phi.row(f.row(x, a)).transpose();
    }
    return ds.size() > 0 ? Eigen::VectorXd(g / ds.size()) : g;
}

Eigen::MatrixXd empirical_occupancy(const Dataset& ds, int num_states, int num_actions, int h) {
    Eigen::MatrixXd occ = Eigen::MatrixXd::Zero(num_states, num_actions);
    for (const auto& tr : ds.trajectories) occ(tr.steps[h].x, tr.steps[h].a) += 1.0;
    if (ds.size() > 0) occ /= ds.size();
    return occ;
}

}  // namespace sorl
