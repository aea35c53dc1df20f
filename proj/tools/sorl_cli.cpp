// Command-line front end for the sparse offline RL library.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.

#include "sorl/actor_critic.hpp"
#include "sorl/datagen.hpp"
#include "sorl/errors.hpp"
#include "sorl/harness.hpp"
#include "sorl/io.hpp"
#include "sorl/lsvi.hpp"
#include "sorl/mdp.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

using namespace sorl;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

const char* kConfigSchema = R"(sweep config ("schema": "sparse-orl/1"):
  mdp:      {num_states, num_actions, H, feature_family, coverage_mode, seed?}
  behavior: {pi_star_weight}
  algorithm: "lsvi" | "actor_critic"     oracle: "srle1" | "srle2" | "srle3" | "ols"
  bonus:    {kind: zero|sparse_max|dense, alpha?, alpha_scale?}
  critic:   {variant: uniform_coverage|pess_opt, solver?, alpha?, alpha_scale?, max_iters?}
  actor:    {T, eta?}
  attack:   {kind: reward_poison|feature_swap|value_flip, magnitude, target_selection: random|high_reward_first}
  grid:     {N: [...], epsilon: [...], d: [...], s: [...]}
  seeds: [...]   lambda?   delta?   output: "results.csv")";

void print(const std::string& s) { std::cout << s << std::flush; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse robust offline RL: generators, learners and sweeps"};
    app.require_subcommand(1);

    // gen-mdp
    auto* gen_mdp = app.add_subcommand("gen-mdp", "Generate a random sparse linear MDP");
    MdpConfig mc;
    std::string family = "signed_binary", coverage = "uniform", out_path;
    std::uint64_t seed = 0;
    gen_mdp->add_option("--states", mc.num_states, "Number of states")->capture_default_str();
    gen_mdp->add_option("--actions", mc.num_actions, "Number of actions")->capture_default_str();
    gen_mdp->add_option("--H", mc.H, "Horizon")->capture_default_str();
    gen_mdp->add_option("--d", mc.d, "Ambient dimension")->capture_default_str();
    gen_mdp->add_option("--s", mc.s, "Sparsity")->capture_default_str();
    gen_mdp->add_option("--family", family, "signed_binary | anchored_simplex")->capture_default_str();
    gen_mdp->add_option("--coverage", coverage, "uniform | narrow")->capture_default_str();
    gen_mdp->add_option("--seed", seed, "Seed")->required();
    gen_mdp->add_option("--out", out_path, "Output JSON (stdout if omitted)");

    // gen-data
    auto* gen_data = app.add_subcommand("gen-data", "Sample an offline dataset");
    std::string mdp_path, policy_path, data_path;
    int n = 1000;
    double pi_star_weight = 0.0;
    gen_data->add_option("--mdp", mdp_path, "MDP JSON")->required();
    gen_data->add_option("--policy", policy_path, "Behavior policy JSON (default: uniform mix with pi*)");
    gen_data->add_option("--pi-star-weight", pi_star_weight, "Weight of pi* in the default behavior")->capture_default_str();
    gen_data->add_option("--N", n, "Number of trajectories")->capture_default_str();
    gen_data->add_option("--seed", seed, "Seed")->required();
    gen_data->add_option("--out", out_path, "Output JSONL")->required();

    // corrupt
    auto* corrupt = app.add_subcommand("corrupt", "Corrupt a dataset");
    std::string attack_kind = "reward_poison", target = "random";
    double magnitude = 1.0, epsilon = 0.1;
    corrupt->add_option("--mdp", mdp_path, "MDP JSON (feature table)")->required();
    corrupt->add_option("--data", data_path, "Input JSONL")->required();
    corrupt->add_option("--kind", attack_kind, "reward_poison | feature_swap | value_flip")->capture_default_str();
    corrupt->add_option("--magnitude", magnitude, "Attack magnitude")->capture_default_str();
    corrupt->add_option("--target", target, "random | high_reward_first")->capture_default_str();
    corrupt->add_option("--epsilon", epsilon, "Corruption fraction")->capture_default_str();
    corrupt->add_option("--seed", seed, "Seed")->required();
    corrupt->add_option("--out", out_path, "Output JSONL")->required();

    // run-lsvi
    auto* run_lsvi_cmd = app.add_subcommand("run-lsvi", "Pessimistic LSVI");
    std::string oracle = "srle2", bonus = "zero", diag_path;
    int s = -1;
    double lambda = -1.0, delta = 0.1, alpha_scale = 1.0;
    run_lsvi_cmd->add_option("--mdp", mdp_path, "MDP JSON (feature table)")->required();
    run_lsvi_cmd->add_option("--data", data_path, "Dataset JSONL")->required();
    run_lsvi_cmd->add_option("--oracle", oracle, "srle1 | srle2 | srle3 | ols")->capture_default_str();
    run_lsvi_cmd->add_option("--bonus", bonus, "zero | sparse_max | dense")->capture_default_str();
    run_lsvi_cmd->add_option("--alpha-scale", alpha_scale, "Multiplier on the default bonus radii")->capture_default_str();
    run_lsvi_cmd->add_option("--s", s, "Sparsity budget (default: from the MDP)");
    run_lsvi_cmd->add_option("--epsilon", epsilon, "Assumed corruption level")->capture_default_str();
    run_lsvi_cmd->add_option("--lambda", lambda, "Ridge (negative: default)")->capture_default_str();
    run_lsvi_cmd->add_option("--delta", delta, "Failure probability")->capture_default_str();
    run_lsvi_cmd->add_option("--out", out_path, "Output policy JSON")->required();
    run_lsvi_cmd->add_option("--diagnostics", diag_path, "Bellman-error CSV (uses the true MDP)");

    // run-ac
    auto* run_ac = app.add_subcommand("run-ac", "Actor-critic");
    std::string variant = "uniform_coverage", trace_path;
    int T = 20;
    double eta = -1.0;
    run_ac->add_option("--mdp", mdp_path, "MDP JSON (feature table)")->required();
    run_ac->add_option("--data", data_path, "Dataset JSONL")->required();
    run_ac->add_option("--critic", variant, "uniform_coverage | pess_opt")->capture_default_str();
    run_ac->add_option("--oracle", oracle, "srle1 | srle2 | srle3 | ols")->capture_default_str();
    run_ac->add_option("--T", T, "Actor iterations")->capture_default_str();
    run_ac->add_option("--eta", eta, "Step size (negative: default)")->capture_default_str();
    run_ac->add_option("--alpha-scale", alpha_scale, "Multiplier on the default critic radii")->capture_default_str();
    run_ac->add_option("--s", s, "Sparsity budget (default: from the MDP)");
    run_ac->add_option("--epsilon", epsilon, "Assumed corruption level")->capture_default_str();
    run_ac->add_option("--lambda", lambda, "Ridge (negative: default)")->capture_default_str();
    run_ac->add_option("--delta", delta, "Failure probability")->capture_default_str();
    run_ac->add_option("--seed", seed, "Seed")->required();
    run_ac->add_option("--out", out_path, "Output policy JSON")->required();
    run_ac->add_option("--trace", trace_path, "Trace CSV");

    // eval
    auto* eval = app.add_subcommand("eval", "Exact value and suboptimality of a policy");
    eval->add_option("--mdp", mdp_path, "MDP JSON")->required();
    eval->add_option("--policy", policy_path, "Policy JSON")->required();

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a seeded experiment grid");
    std::string config_path;
    sweep->add_option("--config", config_path, "Config JSON")->required();

    // demo-lemma
    auto* demo = app.add_subcommand("demo-lemma", "Max/expectation gap for Bernoulli features");
    int d = 40, samples = 100000;
    int ds = 2;
    double lam = 1.0;
    demo->add_option("--d", d, "Dimension")->capture_default_str();
    demo->add_option("--s", ds, "Sparsity")->capture_default_str();
    demo->add_option("--lambda", lam, "Ridge")->capture_default_str();
    demo->add_option("--samples", samples, "Monte-Carlo samples")->capture_default_str();
    demo->add_option("--seed", seed, "Seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code != 0) std::cerr << "\n" << kConfigSchema << "\n";
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*gen_mdp) {
            mc.feature_family = parse_feature_family(family);
            mc.coverage_mode = parse_coverage_mode(coverage);
            const std::string doc = to_json(build_random_sparse_mdp(mc, seed)).dump() + "\n";
            if (out_path.empty()) print(doc);
            else write_file(out_path, doc);
        } else if (*gen_data) {
            const SparseLinearMdp m = mdp_from_json(json::parse(read_file(mdp_path)));
            const Policy behavior = policy_path.empty() ? Policy(behavior_policy(m, pi_star_weight))
                                                        : policy_from_json(json::parse(read_file(policy_path)));
            write_file(out_path, dataset_to_jsonl(generate_dataset(m, behavior, n, seed)));
        } else if (*corrupt) {
            const SparseLinearMdp m = mdp_from_json(json::parse(read_file(mdp_path)));
            const AttackSpec a{parse_attack_kind(attack_kind), magnitude, parse_target_selection(target)};
            const Dataset in = dataset_from_jsonl(read_file(data_path));
            write_file(out_path, dataset_to_jsonl(corrupt_dataset(in, m.features(), a, epsilon, seed)));
        } else if (*run_lsvi_cmd) {
            const SparseLinearMdp m = mdp_from_json(json::parse(read_file(mdp_path)));
            const Dataset data = dataset_from_jsonl(read_file(data_path));
            LsviOptions o;
            o.oracle = parse_oracle(oracle);
            o.bonus.kind = parse_bonus_kind(bonus);
            o.bonus.alpha_scale = alpha_scale;
            o.s = s > 0 ? s : m.sparsity();
            o.bonus.two_s = 2 * o.s;
            o.epsilon = epsilon;
            o.lambda = lambda;
            o.delta = delta;
            const LsviOutput res = run_lsvi(data, m.features(), o);
            write_file(out_path, to_json(Policy(res.policy)).dump() + "\n");
            if (!diag_path.empty()) write_file(diag_path, lsvi_diagnostics_csv(lsvi_diagnostics(m, res), res));
        } else if (*run_ac) {
            const SparseLinearMdp m = mdp_from_json(json::parse(read_file(mdp_path)));
            const Dataset data = dataset_from_jsonl(read_file(data_path));
            ActorCriticOptions o;
            o.critic.variant = parse_critic_variant(variant);
            o.critic.oracle = parse_oracle(oracle);
            o.critic.alpha_scale = alpha_scale;
            o.critic.s = s > 0 ? s : m.sparsity();
            o.critic.epsilon = epsilon;
            o.critic.lambda = lambda;
            o.critic.delta = delta;
            o.T = T;
            o.eta = eta;
            if (!trace_path.empty()) o.true_mdp = &m;
            const ActorCriticResult res = run_actor_critic(data, m.features(), o, seed);
            write_file(out_path, to_json(res.mixture).dump() + "\n");
            if (!trace_path.empty()) write_file(trace_path, trace_csv(res.trace));
        } else if (*eval) {
            const SparseLinearMdp m = mdp_from_json(json::parse(read_file(mdp_path)));
            const Policy p = policy_from_json(json::parse(read_file(policy_path)));
            json out;
            out["value"] = policy_value(m, p);
            out["optimal_value"] = exact_optimal(m).values.V[0](m.x1());
            out["subopt"] = suboptimality(m, p);
            print(out.dump() + "\n");
        } else if (*sweep) {
            const ExperimentConfig cfg = config_from_json(json::parse(read_file(config_path)));
            const auto rows = run_sweep(cfg);
            if (cfg.output.empty()) {
                print(std::string(kResultCsvHeader) + "\n");
                for (const auto& r : rows) print(to_csv_line(r) + "\n");
            }
        } else if (*demo) {
            const MaxGapResult r = demo_max_expectation_gap(d, ds, lam, samples, seed);
            json out;
            out["lhs"] = r.lhs;
            out["rhs"] = r.rhs;
            out["bound"] = r.bound;
            out["gap"] = r.gap();
            out["lhs_se"] = r.lhs_se;
            print(out.dump() + "\n");
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        if (*sweep) std::cerr << kConfigSchema << "\n";
        return kConfigError;
    } catch (const BadEpsilon& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kOk;
}
